use crate::trajectory::Vec3;

/// Natural cubic spline through uniformly spaced knots.
#[derive(Debug, Clone)]
pub struct NaturalCubic {
    spacing: f64,
    knots: Vec<Vec3>,
    second: Vec<Vec3>,
}

impl NaturalCubic {
    /// Knot `i` sits at parameter `i * spacing`. Needs at least two knots.
    pub fn new(knots: &[Vec3], spacing: f64) -> Self {
        let n = knots.len();
        assert!(n >= 2, "spline needs two knots");
        let mut second = vec![Vec3::zeros(); n];
        if n > 2 {
            // Thomas algorithm on the interior system with M_0 = M_{n-1} = 0:
            // M_{i-1} + 4 M_i + M_{i+1} = 6 (y_{i+1} - 2 y_i + y_{i-1}) / h^2
            let m = n - 2;
            let mut c = vec![0.0; m];
            let mut d = vec![Vec3::zeros(); m];
            for i in 0..m {
                let rhs = (knots[i + 2] - knots[i + 1] * 2.0 + knots[i]) * (6.0 / (spacing * spacing));
                if i == 0 {
                    c[i] = 1.0 / 4.0;
                    d[i] = rhs / 4.0;
                } else {
                    let denom = 4.0 - c[i - 1];
                    c[i] = 1.0 / denom;
                    d[i] = (rhs - d[i - 1]) / denom;
                }
            }
            for i in (0..m).rev() {
                let next = if i + 1 < m { second[i + 2] } else { Vec3::zeros() };
                second[i + 1] = d[i] - next * c[i];
            }
        }
        Self {
            spacing,
            knots: knots.to_vec(),
            second,
        }
    }

    pub fn eval(&self, t: f64) -> Vec3 {
        let h = self.spacing;
        let last = self.knots.len() - 1;
        let s = (t / h).clamp(0.0, last as f64);
        let i = (s.floor() as usize).min(last - 1);
        let a = (i as f64 + 1.0) - s;
        let b = s - i as f64;
        self.knots[i] * a
            + self.knots[i + 1] * b
            + (self.second[i] * (a * a * a - a) + self.second[i + 1] * (b * b * b - b)) * (h * h / 6.0)
    }
}
