/// Divides the learning rate after `patience` consecutive non-improving
/// steps, never going below `floor`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrSchedule {
    pub lr: f64,
    pub factor: f64,
    pub patience: usize,
    pub floor: f64,
    /// A constant schedule ignores improvement entirely.
    pub constant: bool,
    stale: usize,
}

impl LrSchedule {
    pub fn new(lr: f64, factor: f64, patience: usize, floor: f64) -> Self {
        assert!(lr > 0.0 && factor > 1.0 && patience > 0 && floor > 0.0);
        Self {
            lr,
            factor,
            patience,
            floor,
            constant: false,
            stale: 0,
        }
    }

    pub fn constant(lr: f64) -> Self {
        Self {
            constant: true,
            ..Self::new(lr, 10.0, 1, lr)
        }
    }

    /// Records one step and returns the learning rate for the next.
    pub fn observe(&mut self, improved: bool) -> f64 {
        if self.constant {
            return self.lr;
        }
        if improved {
            self.stale = 0;
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                self.lr = (self.lr / self.factor).max(self.floor);
                self.stale = 0;
            }
        }
        self.lr
    }
}
