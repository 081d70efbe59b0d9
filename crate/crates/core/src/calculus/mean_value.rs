use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Margin for the open inequalities among the instance parameters.
pub const OPEN_MARGIN: f64 = 1e-9;

/// Default number of grid points.
pub const DEFAULT_GRID: usize = 1 << 14;

/// Two real functions sampled on a uniform grid, with the parameters of the
/// mean value search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanValueInstance {
    pub start: f64,
    pub spacing: f64,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub s: f64,
    pub zeta: f64,
    pub rho: f64,
    pub v: f64,
    pub sigma: f64,
    pub l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanValueResult {
    pub tau: f64,
    pub index: usize,
    pub phi_prime: f64,
    pub psi_prime0: f64,
    /// Largest increment ratio `lhs / (4(1+20v) sqrt((phi'(tau)-psi'(0)) L) |t|)`.
    pub increment_ratio: f64,
}

impl MeanValueInstance {
    /// Samples `phi` and `psi` on `points` uniform nodes of `[start, end]`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_fns<F, G>(
        start: f64,
        end: f64,
        points: usize,
        phi: F,
        psi: G,
        s: f64,
        zeta: f64,
        rho: f64,
        v: f64,
        sigma: f64,
        l: f64,
    ) -> Result<Self>
    where
        F: Fn(f64) -> f64,
        G: Fn(f64) -> f64,
    {
        if points < 3 || !(end > start) {
            return Err(Error::InvalidArgument("grid needs >= 3 points on a nonempty interval".into()));
        }
        let spacing = (end - start) / (points - 1) as f64;
        let ts: Vec<f64> = (0..points).map(|i| start + spacing * i as f64).collect();
        Ok(MeanValueInstance {
            start,
            spacing,
            phi: ts.iter().map(|&t| phi(t)).collect(),
            psi: ts.iter().map(|&t| psi(t)).collect(),
            s,
            zeta,
            rho,
            v,
            sigma,
            l,
        })
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn t(&self, i: usize) -> f64 {
        self.start + self.spacing * i as f64
    }

    /// Index of the grid node equal to `t` (within a tiny fraction of the spacing).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = ((t - self.start) / self.spacing).round();
        if k < 0.0 || k as usize >= self.len() {
            return None;
        }
        let k = k as usize;
        ((self.t(k) - t).abs() <= 1e-6 * self.spacing).then_some(k)
    }

    fn central(values: &[f64], i: usize, h: f64) -> Option<f64> {
        (i > 0 && i + 1 < values.len()).then(|| (values[i + 1] - values[i - 1]) / (2.0 * h))
    }

    pub fn phi_prime(&self, i: usize) -> Option<f64> {
        Self::central(&self.phi, i, self.spacing)
    }

    fn grid_lip(values: &[f64], h: f64) -> f64 {
        values.windows(2).map(|w| (w[1] - w[0]).abs() / h).fold(0.0, f64::max)
    }

    /// Checks every hypothesis on the grid; returns `(index of 0, index of zeta)`.
    pub fn check_hypotheses(&self) -> Result<(usize, usize)> {
        let hyp = |msg: String| Err(Error::Hypothesis(msg));
        if self.phi.len() != self.psi.len() || self.len() < 3 {
            return hyp("phi and psi must share a grid of >= 3 points".into());
        }
        if !(self.zeta.abs() < self.s - OPEN_MARGIN) {
            return hyp(format!("|zeta| < s fails (zeta = {}, s = {})", self.zeta, self.s));
        }
        if !(self.s < self.rho - OPEN_MARGIN) {
            return hyp(format!("s < rho fails (s = {}, rho = {})", self.s, self.rho));
        }
        if !(self.v > OPEN_MARGIN && self.v < 1.0 / 32.0 - OPEN_MARGIN) {
            return hyp(format!("0 < v < 1/32 fails (v = {})", self.v));
        }
        if !(self.sigma > 0.0) || !(self.l > 0.0) {
            return hyp("sigma and L must be positive".into());
        }
        let end = self.t(self.len() - 1);
        if self.start > -self.rho || end < self.rho {
            return hyp(format!("grid [{}, {end}] does not cover [-rho, rho]", self.start));
        }
        let i0 = match self.index_of(0.0) {
            Some(i) => i,
            None => return hyp("0 is not a grid node".into()),
        };
        let iz = match self.index_of(self.zeta) {
            Some(i) => i,
            None => return hyp("zeta is not a grid node".into()),
        };
        let h = self.spacing;
        let lip = Self::grid_lip(&self.phi, h) + Self::grid_lip(&self.psi, h);
        if lip > self.l * (1.0 + OPEN_MARGIN) {
            return hyp(format!("Lip(phi) + Lip(psi) = {lip} exceeds L = {}", self.l));
        }
        let scale = self.phi.iter().chain(&self.psi).fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..self.len() {
            if self.t(i).abs() >= self.s && (self.phi[i] - self.psi[i]).abs() > 1e-12 * scale {
                return hyp(format!("phi != psi at t = {} outside [-s, s]", self.t(i)));
            }
        }
        let gap = (self.phi[iz] - self.psi[iz]).abs();
        if gap == 0.0 {
            return hyp("phi(zeta) = psi(zeta)".into());
        }
        let psi0 = Self::central(&self.psi, i0, h).ok_or_else(|| Error::Hypothesis("psi'(0) needs interior 0".into()))?;
        for i in 0..self.len() {
            let t = self.t(i);
            if t.abs() <= self.rho {
                let lhs = (self.psi[i] - self.psi[i0] - t * psi0).abs();
                if lhs > self.sigma * self.l * t.abs() * (1.0 + OPEN_MARGIN) + 1e-15 * scale {
                    return hyp(format!("psi linearization bound fails at t = {t}"));
                }
            }
        }
        let rho_min = self.s * (self.s * self.l / (self.v * gap)).sqrt();
        if self.rho < rho_min {
            return hyp(format!("rho = {} below s sqrt(sL/(v|phi(zeta)-psi(zeta)|)) = {rho_min}", self.rho));
        }
        let sigma_max = self.v.powi(3) * (gap / (self.s * self.l)).powi(2);
        if self.sigma > sigma_max {
            return hyp(format!(
                "sigma = {} above v^3 ((phi(zeta)-psi(zeta))/(sL))^2 = {sigma_max}",
                self.sigma
            ));
        }
        Ok((i0, iz))
    }

    /// Largest increment ratio at candidate `i`, over all grid shifts `t`
    /// for which both `tau + t` and `t` are grid nodes.
    fn increment_ratio(&self, i: usize, i0: usize, phi_prime: f64, psi0: f64) -> f64 {
        let slope = 4.0 * (1.0 + 20.0 * self.v) * ((phi_prime - psi0) * self.l).sqrt();
        let n = self.len() as isize;
        let (i, i0) = (i as isize, i0 as isize);
        let lo = (-i).max(-i0);
        let hi = (n - 1 - i).min(n - 1 - i0);
        let mut worst: f64 = 0.0;
        for k in lo..=hi {
            if k == 0 {
                continue;
            }
            let a = (i + k) as usize;
            let b = (i0 + k) as usize;
            let lhs = ((self.phi[a] - self.phi[i as usize]) - (self.psi[b] - self.psi[i0 as usize])).abs();
            let t = (k as f64 * self.spacing).abs();
            worst = worst.max(lhs / (slope * t));
        }
        worst
    }
}

/// Grid search for `tau` in `(-s, s) \ {zeta}`, outside `exclude`, with
/// `phi'(tau) >= psi'(0) + v |phi(zeta) - psi(zeta)| / s` and the increment
/// bound `4(1+20v) sqrt((phi'(tau) - psi'(0)) L) |t|` at every grid shift.
///
/// Candidates are tried in order of decreasing `phi'(tau)`.
pub fn mean_value_search(inst: &MeanValueInstance, exclude: &BTreeSet<usize>) -> Result<MeanValueResult> {
    let (i0, iz) = inst.check_hypotheses()?;
    let h = inst.spacing;
    let psi0 = MeanValueInstance::central(&inst.psi, i0, h).expect("checked");
    let gap = (inst.phi[iz] - inst.psi[iz]).abs();
    let threshold = psi0 + inst.v * gap / inst.s;
    let mut candidates: Vec<(usize, f64)> = (1..inst.len() - 1)
        .filter(|&i| i != iz && !exclude.contains(&i) && inst.t(i).abs() < inst.s)
        .filter_map(|i| inst.phi_prime(i).map(|d| (i, d)))
        .filter(|&(_, d)| d >= threshold)
        .collect();
    candidates.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let best = candidates.first().map(|c| c.0);
    for (i, d) in candidates {
        let ratio = inst.increment_ratio(i, i0, d, psi0);
        if ratio <= 1.0 + 1e-12 {
            return Ok(MeanValueResult {
                tau: inst.t(i),
                index: i,
                phi_prime: d,
                psi_prime0: psi0,
                increment_ratio: ratio,
            });
        }
    }
    Err(Error::SearchResolution { best })
}

/// Verifies both conclusions at the returned node, independently of the search.
pub fn verify_mean_value(inst: &MeanValueInstance, result: &MeanValueResult) -> Result<bool> {
    let (i0, iz) = inst.check_hypotheses()?;
    let i = result.index;
    let d = match inst.phi_prime(i) {
        Some(d) => d,
        None => return Ok(false),
    };
    let psi0 = MeanValueInstance::central(&inst.psi, i0, inst.spacing).expect("checked");
    let gap = (inst.phi[iz] - inst.psi[iz]).abs();
    let in_range = inst.t(i).abs() < inst.s && i != iz;
    let derivative_ok = d >= psi0 + inst.v * gap / inst.s;
    Ok(in_range && derivative_ok && inst.increment_ratio(i, i0, d, psi0) <= 1.0 + 1e-12)
}
