//! External potentials `V(x, t)` and their forces `F = -dV/dx`.

use crate::error::{Error, Result};
use crate::grid::{fd_derivative, Grid, RealField};

/// Highest polynomial degree accepted.
pub const MAX_DEGREE: usize = 8;

/// Piecewise-constant-in-time polynomial: segment `i` applies from
/// `starts[i]` until the next start. The first segment covers all earlier times.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialSchedule {
    segments: Vec<(f64, Vec<f64>)>,
}

impl PolynomialSchedule {
    pub fn new(segments: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::domain("polynomial schedule needs at least one segment"));
        }
        for w in segments.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::domain("polynomial schedule start times must increase"));
            }
        }
        for (_, c) in &segments {
            if c.is_empty() || c.len() > MAX_DEGREE + 1 {
                return Err(Error::domain(format!(
                    "polynomial needs 1..={} coefficients, got {}",
                    MAX_DEGREE + 1,
                    c.len()
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain("polynomial coefficients must be finite"));
            }
        }
        Ok(PolynomialSchedule { segments })
    }

    pub fn coeffs_at(&self, t: f64) -> &[f64] {
        let idx = self.segments.iter().rposition(|(s, _)| *s <= t).unwrap_or(0);
        &self.segments[idx].1
    }

    pub fn is_static(&self) -> bool {
        self.segments.len() == 1
    }

    /// Degree ignoring trailing zero coefficients, maximized over segments.
    pub fn degree(&self) -> usize {
        self.segments
            .iter()
            .map(|(_, c)| c.iter().rposition(|v| *v != 0.0).unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    pub fn segments(&self) -> &[(f64, Vec<f64>)] {
        &self.segments
    }
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

fn horner_derivative(c: &[f64], x: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (i, &ci)| acc * x + i as f64 * ci)
}

/// A potential sampled on its own grid, read with nearest-node semantics.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedPotential {
    values: RealField,
    force: Vec<f64>,
}

impl TabulatedPotential {
    pub fn new(values: RealField) -> Result<Self> {
        let g = *values.grid();
        let dv = fd_derivative(values.values(), g.dx(), 1, 0..g.n())?;
        Ok(TabulatedPotential { values, force: dv.into_iter().map(|d| -d).collect() })
    }

    /// Parses whitespace-delimited `x V` rows (`#` starts a comment). Rows
    /// must be uniformly spaced and their count a power of two.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| {
                    Error::Config(format!("tabulated potential line {}: bad number {s:?}", lineno + 1))
                })
            };
            if cols.len() != 2 {
                return Err(Error::Config(format!(
                    "tabulated potential line {}: expected two columns, got {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            rows.push((parse(cols[0])?, parse(cols[1])?));
        }
        if rows.len() < 2 {
            return Err(Error::Config("tabulated potential needs at least two rows".into()));
        }
        let dx = rows[1].0 - rows[0].0;
        if !(dx > 0.0) {
            return Err(Error::Config("tabulated potential x must increase".into()));
        }
        for (i, (x, _)) in rows.iter().enumerate() {
            if (x - (rows[0].0 + i as f64 * dx)).abs() > 1e-9 * dx.max(x.abs()) {
                return Err(Error::Config(format!("tabulated potential row {} is not uniformly spaced", i + 1)));
            }
        }
        let n = rows.len();
        let grid = Grid::new(rows[0].0, rows[0].0 + n as f64 * dx, n)?;
        TabulatedPotential::new(RealField::new(grid, rows.into_iter().map(|r| r.1).collect())?)
    }

    pub fn values(&self) -> &RealField {
        &self.values
    }

    fn index(&self, x: f64) -> Result<usize> {
        self.values.grid().nearest_index(x).ok_or_else(|| {
            let g = self.values.grid();
            Error::domain(format!(
                "x = {x} outside the tabulated range [{}, {})",
                g.x_min(),
                g.x_max()
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    Free,
    ConstantForce { f0: f64 },
    Harmonic { omega: f64 },
    Polynomial(PolynomialSchedule),
    Tabulated(TabulatedPotential),
}

/// External potential together with the particle mass, so every dynamical
/// module reads the mass from one place.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    kind: PotentialKind,
    mass: f64,
}

impl PotentialSpec {
    pub fn new(kind: PotentialKind, mass: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::domain(format!("mass must be positive, got {mass}")));
        }
        match &kind {
            PotentialKind::Harmonic { omega } if !(*omega > 0.0 && omega.is_finite()) => {
                return Err(Error::domain(format!("harmonic frequency must be positive, got {omega}")));
            }
            PotentialKind::ConstantForce { f0 } if !f0.is_finite() => {
                return Err(Error::domain("constant force must be finite"));
            }
            _ => {}
        }
        Ok(PotentialSpec { kind, mass })
    }

    pub fn free(mass: f64) -> Result<Self> {
        Self::new(PotentialKind::Free, mass)
    }

    pub fn constant_force(mass: f64, f0: f64) -> Result<Self> {
        Self::new(PotentialKind::ConstantForce { f0 }, mass)
    }

    pub fn harmonic(mass: f64, omega: f64) -> Result<Self> {
        Self::new(PotentialKind::Harmonic { omega }, mass)
    }

    /// Static polynomial `V = c0 + c1 x + ... `.
    pub fn polynomial(mass: f64, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(PotentialKind::Polynomial(PolynomialSchedule::new(vec![(0.0, coeffs)])?), mass)
    }

    pub fn tabulated(mass: f64, table: TabulatedPotential) -> Result<Self> {
        Self::new(PotentialKind::Tabulated(table), mass)
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn is_static(&self) -> bool {
        match &self.kind {
            PotentialKind::Polynomial(p) => p.is_static(),
            _ => true,
        }
    }

    /// Polynomial degree when known analytically.
    pub fn degree(&self) -> Option<usize> {
        match &self.kind {
            PotentialKind::Free => Some(0),
            PotentialKind::ConstantForce { .. } => Some(1),
            PotentialKind::Harmonic { .. } => Some(2),
            PotentialKind::Polynomial(p) => Some(p.degree()),
            PotentialKind::Tabulated(_) => None,
        }
    }

    pub fn eval_potential(&self, x: f64, t: f64) -> Result<f64> {
        Ok(match &self.kind {
            PotentialKind::Free => 0.0,
            PotentialKind::ConstantForce { f0 } => -f0 * x,
            PotentialKind::Harmonic { omega } => 0.5 * self.mass * omega * omega * x * x,
            PotentialKind::Polynomial(p) => horner(p.coeffs_at(t), x),
            PotentialKind::Tabulated(tab) => tab.values.values()[tab.index(x)?],
        })
    }

    pub fn eval_force(&self, x: f64, t: f64) -> Result<f64> {
        Ok(match &self.kind {
            PotentialKind::Free => 0.0,
            PotentialKind::ConstantForce { f0 } => *f0,
            PotentialKind::Harmonic { omega } => -self.mass * omega * omega * x,
            PotentialKind::Polynomial(p) => -horner_derivative(p.coeffs_at(t), x),
            PotentialKind::Tabulated(tab) => tab.force[tab.index(x)?],
        })
    }

    pub fn potential_field(&self, grid: &Grid, t: f64) -> Result<RealField> {
        let values = (0..grid.n())
            .map(|i| self.eval_potential(grid.x(i), t))
            .collect::<Result<Vec<_>>>()?;
        RealField::new(*grid, values)
    }

    pub fn force_field(&self, grid: &Grid, t: f64) -> Result<RealField> {
        let values = (0..grid.n())
            .map(|i| self.eval_force(grid.x(i), t))
            .collect::<Result<Vec<_>>>()?;
        RealField::new(*grid, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_values() {
        let h = PotentialSpec::harmonic(1.0, 2.0).unwrap();
        assert_eq!(h.eval_potential(1.0, 7.0).unwrap(), 2.0);
        assert_eq!(PotentialSpec::free(1.0).unwrap().eval_potential(5.0, 0.0).unwrap(), 0.0);
        let cubic = PotentialSpec::polynomial(1.0, vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(cubic.eval_potential(2.0, 0.0).unwrap(), 8.0);
    }

    #[test]
    fn builtin_forces() {
        let h = PotentialSpec::harmonic(1.0, 1.0).unwrap();
        assert_eq!(h.eval_force(0.5, 0.0).unwrap(), -0.5);
        let cf = PotentialSpec::constant_force(1.0, 2.0).unwrap();
        assert_eq!(cf.eval_force(-3.0, 1.0).unwrap(), 2.0);
        let quartic = PotentialSpec::polynomial(1.0, vec![0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(quartic.eval_force(1.0, 0.0).unwrap(), -4.0);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(PotentialSpec::harmonic(1.0, 0.0).is_err());
        assert!(PotentialSpec::harmonic(-1.0, 1.0).is_err());
        assert!(PotentialSpec::free(0.0).is_err());
        assert!(PotentialSpec::polynomial(1.0, vec![1.0; MAX_DEGREE + 2]).is_err());
        assert!(PotentialSpec::polynomial(1.0, vec![1.0; MAX_DEGREE + 1]).is_ok());
    }

    #[test]
    fn force_fields() {
        let g = Grid::new(-1.0, 1.0, 64).unwrap();
        assert_eq!(PotentialSpec::free(1.0).unwrap().force_field(&g, 0.0).unwrap().max_abs(), 0.0);
        let f = PotentialSpec::harmonic(1.0, 1.0).unwrap().force_field(&g, 0.0).unwrap();
        for (i, v) in f.values().iter().enumerate() {
            assert_eq!(*v, -g.x(i));
        }
    }

    #[test]
    fn tabulated_matches_polynomial_force() {
        let g = Grid::new(-4.0, 4.0, 128).unwrap();
        let poly = PotentialSpec::polynomial(1.0, vec![0.0, 0.0, 1.0]).unwrap();
        let tab = PotentialSpec::tabulated(
            1.0,
            TabulatedPotential::new(poly.potential_field(&g, 0.0).unwrap()).unwrap(),
        )
        .unwrap();
        let a = poly.force_field(&g, 0.0).unwrap();
        let b = tab.force_field(&g, 0.0).unwrap();
        for i in 0..g.n() {
            assert!((a.values()[i] - b.values()[i]).abs() <= 1e-8);
        }
        assert!(matches!(tab.eval_potential(4.5, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn sampled_polynomial_force_matches_analytic() {
        let g = Grid::new(-3.0, 3.0, 256).unwrap();
        let v = PotentialSpec::polynomial(1.0, vec![0.3, -1.0, 0.5, 0.2, -0.05]).unwrap();
        let sampled = v.potential_field(&g, 0.0).unwrap();
        let d = fd_derivative(sampled.values(), g.dx(), 1, 0..g.n()).unwrap();
        for i in 16..g.n() - 16 {
            assert!((-d[i] - v.eval_force(g.x(i), 0.0).unwrap()).abs() <= 1e-8);
        }
    }

    #[test]
    fn tabulated_text_roundtrip() {
        let text: String = (0..32)
            .map(|i| {
                let x = -2.0 + i as f64 * 0.125;
                format!("{x} {}\n", x * x)
            })
            .collect();
        let tab = TabulatedPotential::parse(&format!("# x V\n{text}")).unwrap();
        assert_eq!(tab.values().grid().n(), 32);
        assert!(TabulatedPotential::parse("0 1\n1 2\n3 4\n").is_err());
        assert!(TabulatedPotential::parse("0 1 2\n").is_err());
    }

    #[test]
    fn schedule_switches_coefficients() {
        let s = PolynomialSchedule::new(vec![(0.0, vec![0.0, 0.0, 1.0]), (2.0, vec![0.0, 0.0, 4.0])]).unwrap();
        let v = PotentialSpec::new(PotentialKind::Polynomial(s), 1.0).unwrap();
        assert_eq!(v.eval_potential(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(v.eval_potential(1.0, 2.5).unwrap(), 4.0);
        assert!(!v.is_static());
    }
}
