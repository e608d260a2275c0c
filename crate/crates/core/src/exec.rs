use serde::{Deserialize, Serialize};

/// How independent work items (replicates, simulated datasets) are scheduled.
/// Results are always returned in index order, so the choice never changes output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    /// rayon's global pool; sequential when built without the `parallel` feature.
    #[default]
    Parallel,
    Sequential,
}

macro_rules! if_rayon {
    ($rayon_value: expr, $else_value: expr) => {{
        #[cfg(feature = "parallel")]
        {
            ($rayon_value)
        }
        #[cfg(not(feature = "parallel"))]
        {
            ($else_value)
        }
    }};
}

/// `(0..len).map(f)` collected in order, in parallel when requested.
pub(crate) fn map_indexed<T, F>(len: usize, execution: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match execution {
        Execution::Sequential => (0..len).map(f).collect(),
        Execution::Parallel => if_rayon!(
            {
                use rayon::prelude::*;
                (0..len).into_par_iter().map(f).collect()
            },
            (0..len).map(f).collect()
        ),
    }
}

/// SplitMix64 finalizer; used to derive independent sub-seeds from `(seed, index)`.
pub(crate) fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_schedules_preserve_order() {
        let a = map_indexed(100, Execution::Parallel, |i| i * i);
        let b = map_indexed(100, Execution::Sequential, |i| i * i);
        assert_eq!(a, b);
        assert_eq!(a[7], 49);
    }
}
