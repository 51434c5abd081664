//! Bounded worker pool shared by all stages.

use crate::error::{Error, Result};

pub const WORKERS_ENV: &str = "PLOTGRID_WORKERS";

/// Worker count: `PLOTGRID_WORKERS` if set, else `configured`, else the
/// available parallelism.
pub fn resolve_workers(configured: Option<usize>) -> Result<usize> {
    let from_env = match std::env::var(WORKERS_ENV) {
        Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
            Error::Config(format!(
                "{WORKERS_ENV} must be a positive integer, got `{v}`"
            ))
        })?),
        Err(_) => None,
    };
    let n = from_env.or(configured).unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });
    if n == 0 {
        return Err(Error::Config("worker count must be positive".into()));
    }
    Ok(n)
}

/// Runs `f` inside a rayon pool of `workers` threads.
///
/// Parallel collects keep input order, so results do not depend on the
/// worker count.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("building worker pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_size_is_honored() {
        assert_eq!(with_workers(3, rayon::current_num_threads).unwrap(), 3);
    }
}
