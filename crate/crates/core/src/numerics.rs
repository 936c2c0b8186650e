//! Small numerical helpers shared across modules.

/// Compensated (Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Trapezoidal rule for samples on a uniform grid of spacing `h`.
pub fn trapezoid(samples: &[f64], h: f64) -> f64 {
    match samples.len() {
        0 | 1 => 0.0,
        n => {
            let interior: NeumaierSum = samples[1..n - 1].iter().copied().collect();
            h * (interior.value() + 0.5 * (samples[0] + samples[n - 1]))
        }
    }
}

/// Cumulative trapezoid: `out[k] = integral from 0 to t_k`.
pub fn cumulative_trapezoid(samples: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    let mut acc = NeumaierSum::new();
    if samples.is_empty() {
        return out;
    }
    out.push(0.0);
    for w in samples.windows(2) {
        acc.add(0.5 * h * (w[0] + w[1]));
        out.push(acc.value());
    }
    out
}

/// Welford accumulator for mean and variance.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero for fewer than two observations.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Self::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_is_exact_for_lines() {
        let xs: Vec<f64> = (0..=10).map(|k| 2.0 * k as f64 * 0.1 + 1.0).collect();
        assert!((trapezoid(&xs, 0.1) - 2.0).abs() < 1e-14);
        let c = cumulative_trapezoid(&xs, 0.1);
        assert_eq!(c[0], 0.0);
        assert!((c[10] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn moments_match_two_pass() {
        let xs = [1.0, 2.0, 4.0, 8.0, 16.0];
        let m: Moments = xs.iter().copied().collect();
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((m.mean() - mean).abs() < 1e-14);
        assert!((m.variance() - var).abs() < 1e-12);
    }

    #[test]
    fn neumaier_recovers_small_terms() {
        let s: NeumaierSum = [1e16, 1.0, -1e16].into_iter().collect();
        assert_eq!(s.value(), 1.0);
    }
}
