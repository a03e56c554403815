//! Analytic initial data `u0`, used both to seed runs and as the closed-form
//! side of the oracles.

use crate::error::Result;
use crate::field::{standard_bump, Point, ScalarField, SpatialGrid, MAX_DIM};

#[derive(Clone, Debug, PartialEq)]
pub enum InitialProfile {
    Zero,
    /// `a exp(1 / (|x - c|^2 / r^2 - 1))` inside the ball, zero outside.
    Bump {
        center: Point,
        radius: f64,
        amplitude: f64,
    },
    /// Two bumps of equal radius and amplitude.
    DoubleBump {
        centers: [Point; 2],
        radius: f64,
        amplitude: f64,
    },
    /// `a` times the indicator of the box `[lo, hi)`.
    Step { lo: Point, hi: Point, amplitude: f64 },
    /// `a prod_c sin(k pi x_c / L)`, periodic on the box.
    Sinusoid {
        wavenumber: u32,
        amplitude: f64,
        half_width: f64,
    },
}

fn bump_value(x: Point, c: Point, r: f64, a: f64, dim: usize) -> f64 {
    let r2 = (0..dim).map(|i| (x[i] - c[i]).powi(2)).sum::<f64>() / (r * r);
    a * standard_bump(r2)
}

fn bump_gradient(x: Point, c: Point, r: f64, a: f64, dim: usize) -> Point {
    let r2 = (0..dim).map(|i| (x[i] - c[i]).powi(2)).sum::<f64>() / (r * r);
    let mut g = [0.0; MAX_DIM];
    if r2 < 1.0 {
        let phi = a * standard_bump(r2);
        let dphi_dr2 = -phi / (r2 - 1.0).powi(2);
        for i in 0..dim {
            g[i] = dphi_dr2 * 2.0 * (x[i] - c[i]) / (r * r);
        }
    }
    g
}

impl InitialProfile {
    pub fn bump(center: Point, radius: f64, amplitude: f64) -> Self {
        InitialProfile::Bump {
            center,
            radius,
            amplitude,
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            InitialProfile::Zero => "zero",
            InitialProfile::Bump { .. } => "bump",
            InitialProfile::DoubleBump { .. } => "double_bump",
            InitialProfile::Step { .. } => "step",
            InitialProfile::Sinusoid { .. } => "sinusoid",
        }
    }

    /// Periodic profiles are exempt from the boundary-margin requirement.
    pub fn is_periodic(&self) -> bool {
        matches!(self, InitialProfile::Sinusoid { .. } | InitialProfile::Zero)
    }

    pub fn eval(&self, x: Point, dim: usize) -> f64 {
        match *self {
            InitialProfile::Zero => 0.0,
            InitialProfile::Bump {
                center,
                radius,
                amplitude,
            } => bump_value(x, center, radius, amplitude, dim),
            InitialProfile::DoubleBump {
                centers,
                radius,
                amplitude,
            } => centers
                .iter()
                .map(|c| bump_value(x, *c, radius, amplitude, dim))
                .sum(),
            InitialProfile::Step { lo, hi, amplitude } => {
                if (0..dim).all(|i| x[i] >= lo[i] && x[i] < hi[i]) {
                    amplitude
                } else {
                    0.0
                }
            }
            InitialProfile::Sinusoid {
                wavenumber,
                amplitude,
                half_width,
            } => {
                let k = wavenumber as f64 * std::f64::consts::PI / half_width;
                (0..dim).map(|i| (k * x[i]).sin()).product::<f64>() * amplitude
            }
        }
    }

    /// Classical gradient; zero almost everywhere for the step profile.
    pub fn gradient(&self, x: Point, dim: usize) -> Point {
        match *self {
            InitialProfile::Zero | InitialProfile::Step { .. } => [0.0; MAX_DIM],
            InitialProfile::Bump {
                center,
                radius,
                amplitude,
            } => bump_gradient(x, center, radius, amplitude, dim),
            InitialProfile::DoubleBump {
                centers,
                radius,
                amplitude,
            } => {
                let a = bump_gradient(x, centers[0], radius, amplitude, dim);
                let b = bump_gradient(x, centers[1], radius, amplitude, dim);
                [a[0] + b[0], a[1] + b[1]]
            }
            InitialProfile::Sinusoid {
                wavenumber,
                amplitude,
                half_width,
            } => {
                let k = wavenumber as f64 * std::f64::consts::PI / half_width;
                let mut g = [0.0; MAX_DIM];
                for i in 0..dim {
                    g[i] = amplitude
                        * k
                        * (0..dim)
                            .map(|j| if j == i { (k * x[j]).cos() } else { (k * x[j]).sin() })
                            .product::<f64>();
                }
                g
            }
        }
    }

    pub fn sample(&self, grid: &SpatialGrid) -> Result<ScalarField> {
        let dim = grid.dim();
        ScalarField::from_fn(*grid, |x| self.eval(x, dim))
    }

    /// Samples `u0(x - shift)` with the argument wrapped into the box.
    pub fn sample_shifted(&self, grid: &SpatialGrid, shift: Point) -> Result<ScalarField> {
        let dim = grid.dim();
        ScalarField::from_fn(*grid, |x| {
            let mut y = [0.0; MAX_DIM];
            for i in 0..dim {
                y[i] = x[i] - shift[i];
            }
            self.eval(grid.wrap_point(y), dim)
        })
    }

    /// Grid quadrature of `|| |grad u0| ||_p`.
    pub fn gradient_lp_norm(&self, grid: &SpatialGrid, p: f64) -> f64 {
        let dim = grid.dim();
        let sum: f64 = (0..grid.len())
            .map(|i| {
                let g = self.gradient(grid.node(i), dim);
                let n = (0..dim).map(|c| g[c] * g[c]).sum::<f64>().sqrt();
                n.powf(p)
            })
            .sum();
        (sum * grid.cell_volume()).powf(1.0 / p)
    }
}
