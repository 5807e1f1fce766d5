//! Indexed trial runner: results land in a vector by trial index, and
//! each trial's seed comes from the disjoint per-trial stream, so the
//! outcome is one fixed function of (seed, trial count) no matter how
//! many worker threads run it.

use kwise::sampling::trial_seed;
use kwise::testers::TesterError;

pub fn run_trials<T, F>(
    trials: usize,
    base_seed: u64,
    threads: usize,
    f: F,
) -> Result<Vec<T>, TesterError>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T, TesterError> + Sync,
{
    let threads = threads.max(1).min(trials.max(1));
    if threads == 1 {
        let mut out = Vec::with_capacity(trials);
        for i in 0..trials {
            out.push(f(i, trial_seed(base_seed, i as u64))?);
        }
        return Ok(out);
    }
    let mut slots: Vec<Option<Result<T, TesterError>>> = Vec::with_capacity(trials);
    slots.resize_with(trials, || None);
    let chunk = trials.div_ceil(threads);
    std::thread::scope(|scope| {
        let f = &f;
        let mut rest = slots.as_mut_slice();
        let mut lo = 0usize;
        while !rest.is_empty() {
            let take = chunk.min(rest.len());
            let (head, tail) = rest.split_at_mut(take);
            rest = tail;
            let start = lo;
            lo += take;
            scope.spawn(move || {
                for (offset, slot) in head.iter_mut().enumerate() {
                    let i = start + offset;
                    *slot = Some(f(i, trial_seed(base_seed, i as u64)));
                }
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.expect("every slot filled"))
        .collect()
}

/// Worker count from `KWISE_THREADS`; absent or unparsable means 1.
pub fn threads_from_env() -> usize {
    std::env::var("KWISE_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or(1)
}
