//! Data-parallel helpers. With the `parallel` feature these run on the rayon
//! pool; without it, or with [`Execution::Sequential`], they are plain loops.
//! Results never depend on the execution mode.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Calls `f(chunk_index, chunk)` for each `chunk_len`-sized piece of `data`.
pub fn for_each_chunk_mut<T, F>(exec: Execution, data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk_len = chunk_len.max(1);
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            data.par_chunks_mut(chunk_len)
                .enumerate()
                .for_each(|(i, c)| f(i, c));
        }
        _ => data
            .chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c)),
    }
}

/// Order-preserving map over `items`.
pub fn map<T, R, F>(exec: Execution, items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.into_par_iter().map(f).collect()
        }
        _ => items.into_iter().map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let run = |exec| {
            let mut v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
            for_each_chunk_mut(exec, &mut v, 37, |ci, c| {
                for x in c.iter_mut() {
                    *x = (*x + ci as f64).sqrt();
                }
            });
            v
        };
        assert_eq!(run(Execution::Sequential), run(Execution::Parallel));
        let a = map(Execution::Sequential, (0..50).collect(), |i: u32| i * i);
        let b = map(Execution::Parallel, (0..50).collect(), |i: u32| i * i);
        assert_eq!(a, b);
    }
}
