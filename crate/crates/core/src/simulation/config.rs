use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Case {
    I,
    II,
    III,
    IV,
}

impl Case {
    pub const ALL: [Case; 4] = [Case::I, Case::II, Case::III, Case::IV];

    pub fn label(self) -> &'static str {
        match self {
            Case::I => "I",
            Case::II => "II",
            Case::III => "III",
            Case::IV => "IV",
        }
    }
}

impl std::str::FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(Case::I),
            "II" | "2" => Ok(Case::II),
            "III" | "3" => Ok(Case::III),
            "IV" | "4" => Ok(Case::IV),
            _ => Err(Error::Config(format!("unknown case '{s}' (expected I, II, III or IV)"))),
        }
    }
}

/// Which statistic a run is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    QuadNorm,
    Conventional,
    Signal,
    Global,
    ErrorVariance,
    Rho,
    RhoConventional,
    Eta,
    Linear,
    TwoSampleEquality,
    Coheritability,
    CoheritabilityConventional,
}

impl TestKind {
    pub const ONE_SAMPLE: [TestKind; 9] = [
        TestKind::QuadNorm,
        TestKind::Conventional,
        TestKind::Signal,
        TestKind::Global,
        TestKind::ErrorVariance,
        TestKind::Rho,
        TestKind::RhoConventional,
        TestKind::Eta,
        TestKind::Linear,
    ];

    pub const TWO_SAMPLE: [TestKind; 3] = [
        TestKind::TwoSampleEquality,
        TestKind::Coheritability,
        TestKind::CoheritabilityConventional,
    ];

    pub fn is_two_sample(self) -> bool {
        TestKind::TWO_SAMPLE.contains(&self)
    }

    pub fn name(self) -> &'static str {
        match self {
            TestKind::QuadNorm => "quad-norm",
            TestKind::Conventional => "conventional",
            TestKind::Signal => "signal",
            TestKind::Global => "global",
            TestKind::ErrorVariance => "error-variance",
            TestKind::Rho => "rho",
            TestKind::RhoConventional => "rho-conventional",
            TestKind::Eta => "eta",
            TestKind::Linear => "linear",
            TestKind::TwoSampleEquality => "two-sample-equality",
            TestKind::Coheritability => "coheritability",
            TestKind::CoheritabilityConventional => "coheritability-conventional",
        }
    }
}

impl std::str::FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TestKind::ONE_SAMPLE
            .iter()
            .chain(TestKind::TWO_SAMPLE.iter())
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown test kind '{s}'")))
    }
}

/// Null value for the run's primary test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NullValue {
    /// The generating parameter, so the null holds.
    Truth,
    /// A fixed value on the scale of the tested parameter; for the
    /// quadratic-norm tests this is the norm `c₀`, not `c₀²`.
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaSpec {
    /// The coefficient vector prescribed by the case.
    CaseDefault,
    Zero,
    /// Entries drawn once per configuration from Unif(0, 1).
    UniformEntries,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlternativeKind {
    /// `β₀ = 1·δσ/(n^{1/2} p^{1/4})`.
    Signal,
    /// `σ² = σ²_base + δ/n^{1/2}`.
    ErrorVariance,
    /// `‖β₀ − γ₀‖² = δ σ² p^{1/2} (1/n + 1/n′)`.
    Difference,
}

impl AlternativeKind {
    pub fn default_grid(self) -> Vec<f64> {
        match self {
            AlternativeKind::Signal => (0..=12).map(|i| i as f64 * 0.5).collect(),
            AlternativeKind::ErrorVariance => (-5..=5).map(|i| i as f64 * 2.0).collect(),
            AlternativeKind::Difference => (0..=10).map(|i| i as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternative {
    pub kind: AlternativeKind,
    pub deltas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub case: Case,
    pub n: usize,
    pub p: usize,
    pub reps: usize,
    pub seed: u64,
    pub alpha: f64,
    pub test: TestKind,
    pub null: NullValue,
    pub beta: BetaSpec,
    /// Error variance of the generating model (both samples).
    pub sigma2: f64,
    pub alternative: Option<Alternative>,
    /// Designed angle between the two coefficient vectors; `None` means `γ₀ = β₀`.
    pub theta: Option<f64>,
    /// Size of the second sample; defaults to `n`.
    pub n2: Option<usize>,
    pub center: bool,
}

impl SimConfig {
    pub fn new(case: Case, n: usize, p: usize) -> Self {
        SimConfig {
            case,
            n,
            p,
            reps: 1000,
            seed: 0,
            alpha: 0.05,
            test: TestKind::QuadNorm,
            null: NullValue::Truth,
            beta: BetaSpec::CaseDefault,
            sigma2: 1.0,
            alternative: None,
            theta: None,
            n2: None,
            center: true,
        }
    }

    pub fn second_n(&self) -> usize {
        self.n2.unwrap_or(self.n)
    }

    pub fn deltas(&self) -> Vec<f64> {
        match &self.alternative {
            Some(a) => a.deltas.clone(),
            None => vec![0.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.p == 0 || self.p >= self.n {
            return fail(format!("need 1 <= p < n, got n={}, p={}", self.n, self.p));
        }
        if self.test.is_two_sample() && self.p >= self.second_n() {
            return fail(format!("need p < n2, got n2={}, p={}", self.second_n(), self.p));
        }
        if self.reps == 0 {
            return fail("reps must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha must lie in (0,1), got {}", self.alpha));
        }
        if !(self.sigma2 > 0.0) {
            return fail(format!("error variance must be positive, got {}", self.sigma2));
        }
        if let Some(t) = self.theta {
            if !(-1.0..=1.0).contains(&t) {
                return fail(format!("designed angle must lie in [-1,1], got {t}"));
            }
            if self.p < 2 && t.abs() < 1.0 {
                return fail("an angle other than ±1 needs p >= 2".into());
            }
        }
        if let Some(alt) = &self.alternative {
            if alt.deltas.is_empty() {
                return fail("alternative grid is empty".into());
            }
            if alt.deltas.iter().any(|d| !d.is_finite()) {
                return fail("alternative grid has a non-finite value".into());
            }
            match alt.kind {
                AlternativeKind::ErrorVariance => {
                    let lowest = alt.deltas.iter().copied().fold(f64::INFINITY, f64::min);
                    if !(self.sigma2 + lowest / (self.n as f64).sqrt() > 0.0) {
                        return fail("error-variance grid reaches a nonpositive variance".into());
                    }
                }
                AlternativeKind::Difference => {
                    if !self.test.is_two_sample() {
                        return fail("difference alternatives need a two-sample test".into());
                    }
                    if alt.deltas.iter().any(|d| *d < 0.0) {
                        return fail("difference grid must be nonnegative".into());
                    }
                }
                AlternativeKind::Signal => {}
            }
        }
        if let NullValue::Value(v) = self.null {
            if !v.is_finite() {
                return fail("null value must be finite".into());
            }
        }
        Ok(())
    }
}
