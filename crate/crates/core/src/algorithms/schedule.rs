/// Scalar sequences `A_r`, `B_r` and `a_{r+1}` of the accelerated method.
///
/// Starts at `A_0 = 0`, `B_0 = 1`; each advance picks the positive root of
/// `λ a² = (A + a) B` and then sets `A ← A + a`, `B ← B + μ a`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AccSchedule {
    pub a_total: f64,
    pub b: f64,
    pub lambda: f64,
    pub mu: f64,
    pub round: usize,
}

impl AccSchedule {
    pub fn new(lambda: f64, mu: f64) -> Self {
        AccSchedule { a_total: 0.0, b: 1.0, lambda, mu, round: 0 }
    }

    /// The next step size `a_{r+1}` without advancing.
    pub fn next_step(&self) -> f64 {
        let (a, b, l) = (self.a_total, self.b, self.lambda);
        (b + (b * b + 4.0 * l * a * b).sqrt()) / (2.0 * l)
    }

    /// Returns the advanced schedule and the step `a_{r+1}` that was taken.
    pub fn advance(&self) -> (AccSchedule, f64) {
        let a = self.next_step();
        let next = AccSchedule {
            a_total: self.a_total + a,
            b: self.b + self.mu * a,
            round: self.round + 1,
            ..*self
        };
        (next, a)
    }
}
