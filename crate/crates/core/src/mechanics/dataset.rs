use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{dp_lagrangian_expr, PendulumParams};
use crate::error::{DatasetError, ExprError};
use crate::expr::{ExprId, ExprStore, StateLayout};

/// Joints of every shipped dataset.
pub const JOINTS: usize = 2;

pub const CSV_HEADER: [&str; 9] = [
    "q1",
    "q2",
    "qd1",
    "qd2",
    "qdd1",
    "qdd2",
    "tau1",
    "tau2",
    "lagrangian",
];

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct StateSample {
    pub q: [f64; JOINTS],
    pub qd: [f64; JOINTS],
    pub qdd: [f64; JOINTS],
    pub tau: [f64; JOINTS],
    pub lagrangian: f64,
}

impl StateSample {
    /// State vector in slot order `(q, qd, qdd)`.
    pub fn state(&self) -> [f64; 3 * JOINTS] {
        let mut s = [0.0; 3 * JOINTS];
        s[..JOINTS].copy_from_slice(&self.q);
        s[JOINTS..2 * JOINTS].copy_from_slice(&self.qd);
        s[2 * JOINTS..].copy_from_slice(&self.qdd);
        s
    }

    /// Values in [`CSV_HEADER`] order.
    pub fn row(&self) -> [f64; 9] {
        let s = self.state();
        [
            s[0],
            s[1],
            s[2],
            s[3],
            s[4],
            s[5],
            self.tau[0],
            self.tau[1],
            self.lagrangian,
        ]
    }

    pub fn from_row(r: &[f64; 9]) -> Self {
        Self {
            q: [r[0], r[1]],
            qd: [r[2], r[3]],
            qdd: [r[4], r[5]],
            tau: [r[6], r[7]],
            lagrangian: r[8],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Dataset {
    pub samples: Vec<StateSample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            samples: idx.iter().map(|&i| self.samples[i]).collect(),
        }
    }

    pub fn head(&self, n: usize) -> Dataset {
        Dataset {
            samples: self.samples[..n.min(self.len())].to_vec(),
        }
    }
}

/// Everything that determines a generated dataset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DatasetSpec {
    pub count: usize,
    pub seed: u64,
    /// Independent random stream for the same seed (e.g. train vs test).
    pub stream: u64,
    pub range: (f64, f64),
    pub params: PendulumParams,
}

impl DatasetSpec {
    pub fn new(count: usize, seed: u64) -> Self {
        Self {
            count,
            seed,
            stream: 0,
            range: (-FRAC_PI_2, FRAC_PI_2),
            params: PendulumParams::default(),
        }
    }

    pub fn stream(self, stream: u64) -> Self {
        Self { stream, ..self }
    }
}

/// Draws states uniformly and labels them with the double pendulum's
/// symbolic Euler-Lagrange torques and Lagrangian values.
pub fn sample_dataset(spec: &DatasetSpec) -> Result<Dataset, DatasetError> {
    spec.params.validate()?;
    let mut store = ExprStore::new(StateLayout::new(JOINTS));
    let l = dp_lagrangian_expr(&mut store, &spec.params);
    sample_lagrangian_dataset(&mut store, l, spec)
        .map_err(|e| DatasetError::InvalidParams(e.to_string()))
}

/// Same sampling scheme, labelled by an arbitrary Lagrangian expression
/// over a two-joint layout (`spec.params` is ignored).
pub fn sample_lagrangian_dataset(
    store: &mut ExprStore,
    lagrangian: ExprId,
    spec: &DatasetSpec,
) -> Result<Dataset, ExprError> {
    assert_eq!(store.layout().n_joints(), JOINTS);
    let (lo, hi) = spec.range;
    assert!(lo < hi, "empty sampling range");
    let torques = store.euler_lagrange(lagrangian)?;
    let programs: Vec<_> = torques.iter().map(|&t| store.compile(t)).collect();
    let l_prog = store.compile(lagrangian);
    for p in programs.iter().chain([&l_prog]) {
        p.check_slots(3 * JOINTS, 0)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(spec.stream);
    let dist = Uniform::new(lo, hi);
    let mut buf = Vec::new();
    let samples = (0..spec.count)
        .map(|_| {
            let mut s = [0.0; 3 * JOINTS];
            for v in &mut s {
                *v = dist.sample(&mut rng);
            }
            let mut tau = [0.0; JOINTS];
            for (t, p) in tau.iter_mut().zip(&programs) {
                *t = p.eval_unchecked(&s, &[], &mut buf);
            }
            StateSample {
                q: [s[0], s[1]],
                qd: [s[2], s[3]],
                qdd: [s[4], s[5]],
                tau,
                lagrangian: l_prog.eval_unchecked(&s, &[], &mut buf),
            }
        })
        .collect();
    Ok(Dataset { samples })
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<(), DatasetError> {
    let io = |e: std::io::Error| DatasetError::Io {
        path: path.display().to_string(),
        source: e,
    };
    let csv_err = |e: csv::Error| io(e.into());
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for s in &ds.samples {
        w.write_record(s.row().iter().map(|v| format!("{v:.16e}")))
            .map_err(csv_err)?;
    }
    w.flush().map_err(io)
}

pub fn load_dataset(path: &Path) -> Result<Dataset, DatasetError> {
    let io = |e: std::io::Error| DatasetError::Io {
        path: path.display().to_string(),
        source: e,
    };
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| io(e.into()))?;
    let mut samples = Vec::new();
    let mut seen_header = false;
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            DatasetError::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if !seen_header {
            if rec.iter().ne(CSV_HEADER) {
                return Err(DatasetError::Parse {
                    line,
                    message: format!("expected header {:?}", CSV_HEADER.join(",")),
                });
            }
            seen_header = true;
            continue;
        }
        if rec.len() != CSV_HEADER.len() {
            return Err(DatasetError::Parse {
                line,
                message: format!("row has {} fields, expected {}", rec.len(), CSV_HEADER.len()),
            });
        }
        let mut row = [0.0; 9];
        for (k, (dst, field)) in row.iter_mut().zip(rec.iter()).enumerate() {
            *dst = field.trim().parse().map_err(|_| DatasetError::Parse {
                line,
                message: format!("column {:?}: invalid number {field:?}", CSV_HEADER[k]),
            })?;
        }
        samples.push(StateSample::from_row(&row));
    }
    if !seen_header {
        return Err(DatasetError::Parse {
            line: 1,
            message: "missing header".into(),
        });
    }
    Ok(Dataset { samples })
}
