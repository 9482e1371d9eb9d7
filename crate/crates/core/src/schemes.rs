//! The three heralded Bell-state scheme topologies.
//!
//! Logical modes come first (`q1a, q1b, q2a, q2b`), auxiliary modes after them.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{read_file, Error, Result};
use crate::fock::{bell_target, BellKind, FockState, Occupation};
use crate::interferometer::MeshLayout;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeKind {
    #[serde(rename = "six-mode")]
    SixMode,
    #[serde(rename = "five-mode")]
    FiveMode,
    #[serde(rename = "two-stage")]
    TwoStage,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::SixMode => "six-mode",
            SchemeKind::FiveMode => "five-mode",
            SchemeKind::TwoStage => "two-stage",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "six-mode" => Ok(SchemeKind::SixMode),
            "five-mode" => Ok(SchemeKind::FiveMode),
            "two-stage" => Ok(SchemeKind::TwoStage),
            other => Err(Error::Parse(format!("unknown scheme type {other:?}"))),
        }
    }
}

/// Second interferometer of the two-stage scheme. It sees the stage-one conditional
/// state on the logical modes plus `fresh` photons injected on the auxiliary modes.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondStage {
    pub fresh: Occupation,
    pub herald: Occupation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeSpec {
    pub kind: SchemeKind,
    pub n_modes: usize,
    pub input: Occupation,
    pub logical_modes: [usize; 4],
    pub aux_modes: Vec<usize>,
    /// Detection pattern `d` on `aux_modes` (first stage for two-stage schemes).
    pub herald: Occupation,
    pub target: BellKind,
    pub second_stage: Option<SecondStage>,
}

impl SchemeSpec {
    /// Six modes, four photons, two detectors each seeing one photon.
    pub fn six_mode() -> Self {
        SchemeSpec {
            kind: SchemeKind::SixMode,
            n_modes: 6,
            input: Occupation::from([1, 1, 1, 1, 0, 0]),
            logical_modes: [0, 1, 2, 3],
            aux_modes: vec![4, 5],
            herald: Occupation::from([1, 1]),
            target: BellKind::PhiPlus,
            second_stage: None,
        }
    }

    /// Five modes, four photons, one detector seeing two photons.
    pub fn five_mode() -> Self {
        SchemeSpec {
            kind: SchemeKind::FiveMode,
            n_modes: 5,
            input: Occupation::from([1, 1, 1, 1, 0]),
            logical_modes: [0, 1, 2, 3],
            aux_modes: vec![4],
            herald: Occupation::from([2]),
            target: BellKind::PhiPlus,
            second_stage: None,
        }
    }

    /// Two five-mode interferometers: three photons, herald one on `a1`, add a fresh
    /// photon on `a2`, herald one on `a2`.
    pub fn two_stage() -> Self {
        SchemeSpec {
            kind: SchemeKind::TwoStage,
            n_modes: 5,
            input: Occupation::from([1, 1, 1, 0, 0]),
            logical_modes: [0, 1, 2, 3],
            aux_modes: vec![4],
            herald: Occupation::from([1]),
            target: BellKind::PhiPlus,
            second_stage: Some(SecondStage {
                fresh: Occupation::from([1]),
                herald: Occupation::from([1]),
            }),
        }
    }

    pub fn of_kind(kind: SchemeKind) -> Self {
        match kind {
            SchemeKind::SixMode => Self::six_mode(),
            SchemeKind::FiveMode => Self::five_mode(),
            SchemeKind::TwoStage => Self::two_stage(),
        }
    }

    pub fn with_input(mut self, input: Occupation) -> Result<Self> {
        self.input = input;
        self.validate()?;
        Ok(self)
    }

    pub fn with_target(mut self, target: BellKind) -> Self {
        self.target = target;
        self
    }

    pub fn target_state(&self) -> FockState {
        bell_target(self.target)
    }

    pub fn is_two_stage(&self) -> bool {
        self.second_stage.is_some()
    }

    /// One rectangular mesh per interferometer, in the order they are applied.
    pub fn mesh_layouts(&self) -> Vec<MeshLayout> {
        let stages = if self.is_two_stage() { 2 } else { 1 };
        vec![MeshLayout::clements(self.n_modes); stages]
    }

    pub fn total_input_photons(&self) -> usize {
        self.input.photons() + self.second_stage.as_ref().map_or(0, |s| s.fresh.photons())
    }

    pub fn total_heralded_photons(&self) -> usize {
        self.herald.photons() + self.second_stage.as_ref().map_or(0, |s| s.herald.photons())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScheme(msg));
        if self.input.modes() != self.n_modes {
            return bad(format!(
                "input occupation {} has {} modes, scheme has {}",
                self.input,
                self.input.modes(),
                self.n_modes
            ));
        }
        let mut seen = vec![false; self.n_modes];
        for &m in self.logical_modes.iter().chain(&self.aux_modes) {
            if m >= self.n_modes || seen[m] {
                return bad(format!("mode {m} is out of range or assigned twice"));
            }
            seen[m] = true;
        }
        if seen.iter().any(|s| !s) {
            return bad("logical and auxiliary modes do not cover every mode".into());
        }
        if self.herald.modes() != self.aux_modes.len() {
            return bad(format!(
                "herald pattern {} does not match {} auxiliary modes",
                self.herald,
                self.aux_modes.len()
            ));
        }
        match &self.second_stage {
            None => {
                if self.input.photons() != 4 {
                    return bad(format!(
                        "single-stage schemes take 4 photons, got {}",
                        self.input.photons()
                    ));
                }
            }
            Some(stage) => {
                if self.input.photons() != 3 || stage.fresh.photons() != 1 {
                    return bad("two-stage schemes take 3 photons then 1 fresh photon".into());
                }
                if stage.fresh.modes() != self.aux_modes.len()
                    || stage.herald.modes() != self.aux_modes.len()
                {
                    return bad("second-stage patterns must cover the auxiliary modes".into());
                }
                if self.input.photons() < self.herald.photons() + 2 {
                    return bad("first stage must leave two photons in the logical modes".into());
                }
            }
        }
        if self.total_input_photons() != self.total_heralded_photons() + 2 {
            return bad(format!(
                "photon bookkeeping: {} in, {} heralded, target needs 2",
                self.total_input_photons(),
                self.total_heralded_photons()
            ));
        }
        Ok(())
    }

    /// Either a scheme name (`six-mode`, `five-mode`, `two-stage`) or a path to a
    /// scheme config file.
    pub fn resolve(arg: &str) -> Result<Self> {
        if let Ok(kind) = arg.parse::<SchemeKind>() {
            return Ok(Self::of_kind(kind));
        }
        SchemeConfig::load(arg)?.into_spec()
    }
}

/// `{type, input_occupation?, target?}`; omitted fields take the scheme defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    #[serde(rename = "type")]
    pub kind: SchemeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_occupation: Option<OccupationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<BellKind>,
}

/// An occupation written as a digit string or as an array of counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OccupationSpec {
    Text(String),
    Counts(Vec<usize>),
}

impl OccupationSpec {
    pub fn to_occupation(&self) -> Result<Occupation> {
        match self {
            OccupationSpec::Text(s) => s.parse(),
            OccupationSpec::Counts(v) => Ok(Occupation::new(v.clone())),
        }
    }
}

impl SchemeConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&read_file(path)?)
    }

    pub fn into_spec(self) -> Result<SchemeSpec> {
        let mut spec = SchemeSpec::of_kind(self.kind);
        if let Some(t) = self.target {
            spec = spec.with_target(t);
        }
        if let Some(occ) = &self.input_occupation {
            spec = spec.with_input(occ.to_occupation()?)?;
        }
        spec.validate()?;
        Ok(spec)
    }
}
