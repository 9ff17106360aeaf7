use crate::scalar::Real;

/// Sample mean and standard error of the mean (unbiased variance). A single
/// sample has zero standard error.
pub fn mean_and_std_error<T: Real>(samples: &[T]) -> (T, T) {
    let n = samples.len();
    if n == 0 {
        return (T::nan(), T::nan());
    }
    let nf = T::from_usize_lossy(n);
    let mean = samples.iter().fold(T::zero(), |acc, &v| acc + v) / nf;
    if n == 1 {
        return (mean, T::zero());
    }
    let ss = samples.iter().fold(T::zero(), |acc, &v| acc + (v - mean) * (v - mean));
    let var = ss / T::from_usize_lossy(n - 1);
    (mean, (var / nf).sqrt())
}
