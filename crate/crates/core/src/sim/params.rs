use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kv;

const DEFAULT_FILE: &str = include_str!("../../config/default.params");

/// Physical coefficients of the root-zone bucket and oxygen model. Rates are per
/// ten-minute step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub theta_s: f64,
    pub theta_fc: f64,
    pub theta_wp: f64,
    pub theta_r: f64,
    pub z_root: f64,
    pub flood_gain_mm_per_step: f64,
    pub ks_mm_per_step: f64,
    pub gamma: f64,
    pub et_base_mm_per_step: f64,
    pub t_ref_c: f64,
    pub o_atm_pct: f64,
    pub d_max_per_step: f64,
    pub mu: f64,
    pub r_base_pct_per_step: f64,
    pub q10: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self::from_kv_overrides(&Self::zeroed(), DEFAULT_FILE)
            .expect("bundled default.params is valid")
    }
}

macro_rules! fields {
    ($m:ident) => {
        $m!(theta_s, theta_fc, theta_wp, theta_r, z_root, flood_gain_mm_per_step, ks_mm_per_step,
            gamma, et_base_mm_per_step, t_ref_c, o_atm_pct, d_max_per_step, mu,
            r_base_pct_per_step, q10)
    };
}

impl SimParams {
    fn zeroed() -> Self {
        macro_rules! zero {
            ($($f:ident),*) => { SimParams { $($f: 0.0),* } };
        }
        fields!(zero)
    }

    /// Parse a parameter file. Keys not present keep their default value; unknown keys are
    /// rejected.
    pub fn from_kv(text: &str) -> Result<Self> {
        let p = Self::from_kv_overrides(&Self::default(), text)?;
        p.validate()?;
        Ok(p)
    }

    fn from_kv_overrides(base: &Self, text: &str) -> Result<Self> {
        let mut p = *base;
        for e in kv::parse(text)? {
            macro_rules! set {
                ($($f:ident),*) => {
                    match e.key {
                        $(stringify!($f) => p.$f = e.f64()?,)*
                        _ => return Err(e.unknown()),
                    }
                };
            }
            fields!(set);
        }
        Ok(p)
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        macro_rules! put {
            ($($f:ident),*) => { $( writeln!(s, "{} = {}", stringify!($f), self.$f).unwrap(); )* };
        }
        fields!(put);
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        macro_rules! finite {
            ($($f:ident),*) => { $( if !self.$f.is_finite() { return bad(format!("{} is not finite", stringify!($f))); } )* };
        }
        fields!(finite);
        if !(self.theta_r < self.theta_wp
            && self.theta_wp < self.theta_fc
            && self.theta_fc < self.theta_s
            && self.theta_s <= 1.0
            && self.theta_r >= 0.0)
        {
            return bad(format!(
                "need 0 <= theta_r < theta_wp < theta_fc < theta_s <= 1, got {} {} {} {}",
                self.theta_r, self.theta_wp, self.theta_fc, self.theta_s
            ));
        }
        for (name, x) in [
            ("flood_gain_mm_per_step", self.flood_gain_mm_per_step),
            ("ks_mm_per_step", self.ks_mm_per_step),
            ("gamma", self.gamma),
            ("et_base_mm_per_step", self.et_base_mm_per_step),
            ("d_max_per_step", self.d_max_per_step),
            ("mu", self.mu),
            ("r_base_pct_per_step", self.r_base_pct_per_step),
            ("q10", self.q10),
        ] {
            if x < 0.0 {
                return bad(format!("{name} must be >= 0, got {x}"));
            }
        }
        if !(self.z_root > 0.0) {
            return bad("z_root must be > 0".into());
        }
        if !(self.t_ref_c > 0.0) {
            return bad("t_ref_c must be > 0".into());
        }
        if !(self.o_atm_pct > 0.0 && self.o_atm_pct <= 21.0) {
            return bad(format!("o_atm_pct must be in (0, 21], got {}", self.o_atm_pct));
        }
        if self.d_max_per_step > 1.0 {
            return bad("d_max_per_step must be <= 1".into());
        }
        Ok(())
    }

    /// Plant-available storage limiter for ET: 0 at or below wilting point, 1 at field
    /// capacity and above.
    pub fn soil_limiter(&self, theta: f64) -> f64 {
        ((theta - self.theta_wp) / (self.theta_fc - self.theta_wp)).clamp(0.0, 1.0)
    }

    pub fn drainage(&self, theta: f64) -> f64 {
        if theta > self.theta_fc {
            let x = ((theta - self.theta_fc) / (self.theta_s - self.theta_fc)).min(1.0);
            self.ks_mm_per_step * x.powf(self.gamma)
        } else {
            0.0
        }
    }

    /// Effective gas exchange rate, 1/step.
    pub fn diffusion(&self, theta: f64) -> f64 {
        let air = ((self.theta_s - theta) / (self.theta_s - self.theta_r)).clamp(0.0, 1.0);
        self.d_max_per_step * air.powf(self.mu)
    }

    /// Root plus microbial respiration, % vol per step.
    pub fn respiration(&self, theta: f64, temp_c: f64) -> f64 {
        self.r_base_pct_per_step
            * self.q10.powf((temp_c - self.t_ref_c) / 10.0)
            * (theta / self.theta_s)
    }

    /// Oxygen level at which gas exchange balances respiration for a fixed water content and
    /// temperature.
    pub fn equilibrium_oxygen(&self, theta: f64, temp_c: f64) -> f64 {
        let d = self.diffusion(theta);
        if d <= 0.0 {
            return 0.0;
        }
        (self.o_atm_pct - self.respiration(theta, temp_c) / d).clamp(0.0, self.o_atm_pct)
    }
}
