use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Outcome of one seed. Failed seeds are kept and flagged.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    pub train_mse: f64,
    pub test_mse: f64,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupStats {
    pub group: &'static str,
    pub n: usize,
    pub train_mean: f64,
    pub train_std: f64,
    pub test_mean: f64,
    pub test_std: f64,
}

/// Mean and population standard deviation.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v.sqrt())
}

/// Groups `best`, `best5`, `all`, `worst5` of the successful seeds ordered
/// by train MSE.
pub fn summarize(results: &[SeedResult]) -> Vec<GroupStats> {
    let mut ok: Vec<&SeedResult> = results
        .iter()
        .filter(|r| r.failure.is_none() && r.train_mse.is_finite())
        .collect();
    if ok.is_empty() {
        return Vec::new();
    }
    ok.sort_by(|a, b| a.train_mse.total_cmp(&b.train_mse).then(a.seed.cmp(&b.seed)));
    let n = ok.len();
    let five = n.min(5);
    let groups: [(&'static str, &[&SeedResult]); 4] = [
        ("best", &ok[..1]),
        ("best5", &ok[..five]),
        ("all", &ok[..]),
        ("worst5", &ok[n - five..]),
    ];
    groups
        .iter()
        .map(|(name, g)| {
            let (train_mean, train_std) = mean_std(&g.iter().map(|r| r.train_mse).collect::<Vec<_>>());
            let (test_mean, test_std) = mean_std(&g.iter().map(|r| r.test_mse).collect::<Vec<_>>());
            GroupStats {
                group: name,
                n: g.len(),
                train_mean,
                train_std,
                test_mean,
                test_std,
            }
        })
        .collect()
}

/// Summary table followed by one row per seed (failures included).
pub fn write_summary(path: &Path, stats: &[GroupStats], results: &[SeedResult]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "group,n,train_mean,train_std,test_mean,test_std")?;
    for s in stats {
        writeln!(
            w,
            "{},{},{:e},{:e},{:e},{:e}",
            s.group, s.n, s.train_mean, s.train_std, s.test_mean, s.test_std
        )?;
    }
    writeln!(w)?;
    writeln!(w, "seed,train_mse,test_mse,status")?;
    for r in results {
        let status = r.failure.as_deref().unwrap_or("ok").replace(',', ";");
        writeln!(w, "{},{:e},{:e},{}", r.seed, r.train_mse, r.test_mse, status)?;
    }
    w.flush()
}

/// Runs `run` for every seed on up to `threads` workers; results keep the
/// order of `seeds`.
pub fn run_sweep<F>(seeds: &[u64], threads: usize, run: F) -> Vec<SeedResult>
where
    F: Fn(u64) -> SeedResult + Sync,
{
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<SeedResult>>> = Mutex::new(vec![None; seeds.len()]);
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, seeds.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= seeds.len() {
                    break;
                }
                let r = run(seeds[i]);
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|r| r.expect("every seed ran"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(seed: u64, train: f64, test: f64) -> SeedResult {
        SeedResult {
            seed,
            train_mse: train,
            test_mse: test,
            failure: None,
        }
    }

    #[test]
    fn single_seed_groups_are_identical() {
        let s = summarize(&[r(1, 0.5, 0.7)]);
        assert_eq!(s.len(), 4);
        for g in &s {
            assert_eq!((g.n, g.train_mean, g.test_mean, g.train_std), (1, 0.5, 0.7, 0.0));
        }
    }

    #[test]
    fn mean_of_two() {
        let s = summarize(&[r(1, 1.0, 0.0), r(2, 3.0, 0.0)]);
        assert_eq!(s[2].train_mean, 2.0);
        assert_eq!(s[2].train_std, 1.0);
    }

    #[test]
    fn ordering_by_train_mse() {
        let rs: Vec<SeedResult> = (0..10).map(|i| r(i, (10 - i) as f64, i as f64)).collect();
        let s = summarize(&rs);
        assert_eq!(s[0].train_mean, 1.0);
        assert_eq!(s[0].test_mean, 9.0);
        assert_eq!(s[3].train_mean, 8.0);
    }

    #[test]
    fn failures_are_excluded_but_kept() {
        let mut bad = r(3, f64::NAN, f64::NAN);
        bad.failure = Some("diverged".into());
        let rs = vec![r(1, 1.0, 1.0), bad];
        assert_eq!(summarize(&rs)[2].n, 1);
        let out = run_sweep(&[5, 6, 7], 2, |s| r(s, s as f64, 0.0));
        assert_eq!(out.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![5, 6, 7]);
    }
}
