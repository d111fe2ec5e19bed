use core::ops::{Add, Mul, Sub};

/// First-order low-pass `alpha / (s + alpha)` discretized with the bilinear
/// transform. `alpha` and the step are both in per-unit time, so the DC gain
/// is exactly one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowPass<T> {
    c_state: f64,
    c_input: f64,
    y: T,
    x_prev: T,
}

impl<T> LowPass<T>
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    pub fn new(alpha: f64, h: f64, initial: T) -> Self {
        let ah = alpha * h;
        Self {
            c_state: (2.0 - ah) / (2.0 + ah),
            c_input: ah / (2.0 + ah),
            y: initial,
            x_prev: initial,
        }
    }

    pub fn update(&mut self, x: T) -> T {
        self.y = self.y * self.c_state + (x + self.x_prev) * self.c_input;
        self.x_prev = x;
        self.y
    }

    pub fn output(&self) -> T {
        self.y
    }

    pub fn reset(&mut self, value: T) {
        self.y = value;
        self.x_prev = value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dc_gain_is_one() {
        let mut f = LowPass::new(0.2, 0.0628, 0.0);
        let mut y = 0.0;
        for _ in 0..20_000 {
            y = f.update(0.7);
        }
        assert!((y - 0.7).abs() < 1e-12);
    }

    #[test]
    fn step_matches_continuous_response() {
        // Oracle: y(t) = 1 - exp(-alpha t); bilinear error is O(h^2).
        let (alpha, h) = (2.0, 1e-3);
        let mut f = LowPass::new(alpha, h, 0.0);
        // First sample sees a half-step because the previous input was 0.
        let mut y = f.update(1.0);
        let mut t = h;
        for _ in 0..999 {
            y = f.update(1.0);
            t += h;
        }
        let exact = 1.0 - libm::exp(-alpha * (t - 0.5 * h));
        assert!((y - exact).abs() < 1e-6, "{y} vs {exact}");
    }
}
