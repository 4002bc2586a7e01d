//! Analysis parameters: pixel groups, windows, binning.

use crate::AnalysisError;

/// Parameters of the coincidence analysis.
///
/// All times are wall-clock nanoseconds. The coincidence window `delta_ns`
/// and the normalization region bounds must be multiples of `bin_width_ns`
/// so the boxcar sum and the plateau average land on bin edges exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    /// Pixels of the start group.
    pub group1: Vec<u16>,
    /// Pixels of the stop group. Ignored in single-group mode.
    pub group2: Vec<u16>,
    /// Coincidence window width.
    pub delta_ns: u64,
    /// Spurious-coincidence veto half-width: a group event is dropped if any
    /// event outside both groups lies within this distance of it.
    pub delta_s_ns: u64,
    /// Delay histogram bin width.
    pub bin_width_ns: u64,
    /// Largest delay on the reported curve.
    pub max_lag_ns: u64,
    /// `[lo, hi)` delay region whose mean windowed rate defines the plateau.
    pub norm_region_ns: (u64, u64),
    /// Pair distinct pixels of `group1` with each other instead of pairing
    /// `group1` against `group2`. Dedup is skipped in this mode.
    pub single_group_mode: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            group1: vec![0, 8, 16, 24, 32, 40],
            group2: vec![5, 13, 21, 29, 37, 45],
            delta_ns: 400,
            delta_s_ns: 150,
            bin_width_ns: 25,
            max_lag_ns: 1000,
            norm_region_ns: (500, 700),
            single_group_mode: false,
        }
    }
}

impl AnalysisConfig {
    /// Check internal consistency. Every analysis entry point calls this.
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.group1.is_empty() {
            return Err(AnalysisError::EmptyGroup("start"));
        }
        if !self.single_group_mode {
            if self.group2.is_empty() {
                return Err(AnalysisError::EmptyGroup("stop"));
            }
            if let Some(&p) = self.group1.iter().find(|p| self.group2.contains(p)) {
                return Err(AnalysisError::OverlappingGroups(p));
            }
        }
        if self.bin_width_ns == 0 {
            return Err(AnalysisError::BadBinning("bin width is zero".into()));
        }
        if self.delta_ns == 0 || self.delta_ns % self.bin_width_ns != 0 {
            return Err(AnalysisError::BadBinning(format!(
                "coincidence window {} ns is not a positive multiple of the {} ns bin width",
                self.delta_ns, self.bin_width_ns
            )));
        }
        if self.max_lag_ns == 0 || self.max_lag_ns % self.bin_width_ns != 0 {
            return Err(AnalysisError::BadBinning(format!(
                "max lag {} ns is not a positive multiple of the {} ns bin width",
                self.max_lag_ns, self.bin_width_ns
            )));
        }
        let (lo, hi) = self.norm_region_ns;
        if lo >= hi || hi > self.max_lag_ns {
            return Err(AnalysisError::BadNormRegion(format!(
                "[{lo}, {hi}) must be a nonempty subset of [0, {})",
                self.max_lag_ns
            )));
        }
        if lo % self.bin_width_ns != 0 || hi % self.bin_width_ns != 0 {
            return Err(AnalysisError::BadNormRegion(format!(
                "bounds [{lo}, {hi}) must be multiples of the {} ns bin width",
                self.bin_width_ns
            )));
        }
        if (hi - lo) / self.bin_width_ns < 3 {
            return Err(AnalysisError::BadNormRegion(
                "region must span at least 3 bins".into(),
            ));
        }
        Ok(())
    }

    /// Membership table for fast pixel classification.
    pub(crate) fn membership(&self) -> Vec<GroupTag> {
        let max_pixel = self
            .group1
            .iter()
            .chain(self.group2.iter())
            .copied()
            .max()
            .unwrap_or(0) as usize;
        let mut table = vec![GroupTag::Outside; max_pixel + 1];
        for &p in &self.group1 {
            table[p as usize] = GroupTag::Group1;
        }
        if !self.single_group_mode {
            for &p in &self.group2 {
                table[p as usize] = GroupTag::Group2;
            }
        }
        table
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum GroupTag {
    Group1,
    Group2,
    Outside,
}

pub(crate) fn tag_of(table: &[GroupTag], pixel: u16) -> GroupTag {
    table
        .get(pixel as usize)
        .copied()
        .unwrap_or(GroupTag::Outside)
}
