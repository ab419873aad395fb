use serde::{Deserialize, Serialize};

use super::MiEstimate;

/// Key MI minus the larger of the two leakage estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkrEstimate {
    pub key_mi: MiEstimate,
    pub leakage: MiEstimate,
    pub skr_raw: f64,
    pub skr_clamped: f64,
}

impl SkrEstimate {
    /// Standard error of `skr_raw`, treating the two estimates as
    /// independent. `None` when either side lacks one.
    pub fn std_error(&self) -> Option<f64> {
        let a = self.key_mi.std_error?;
        let b = self.leakage.std_error?;
        Some(a.hypot(b))
    }
}

pub fn skr_lower_bound(key_mi: MiEstimate, leak_a: MiEstimate, leak_b: MiEstimate) -> SkrEstimate {
    let leakage = if leak_b.bits > leak_a.bits { leak_b } else { leak_a };
    let skr_raw = key_mi.bits - leakage.bits;
    SkrEstimate {
        key_mi,
        leakage,
        skr_raw,
        skr_clamped: skr_raw.max(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infotheory::MiMethod;

    fn est(bits: f64) -> MiEstimate {
        MiEstimate::new(bits, MiMethod::Knn, 100)
    }

    #[test]
    fn zero_leakage_keeps_key_mi() {
        let s = skr_lower_bound(est(2.5), est(0.0), est(0.0));
        assert_eq!(s.skr_raw, 2.5);
        assert_eq!(s.skr_clamped, 2.5);
    }

    #[test]
    fn excess_leakage_clamps_but_keeps_raw() {
        let s = skr_lower_bound(est(1.0), est(0.5), est(1.75));
        assert_eq!(s.leakage.bits, 1.75);
        assert_eq!(s.skr_raw, -0.75);
        assert_eq!(s.skr_clamped, 0.0);
        assert_eq!(s.std_error(), None);
    }
}
