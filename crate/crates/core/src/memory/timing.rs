use alloc::format;

use super::MemoryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemoryKind {
    Dram,
    Nvm,
}

/// Timing parameters in controller cycles plus per-command energies in nJ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingProfile {
    pub kind: MemoryKind,
    pub t_rcd: u64,
    pub t_ras: u64,
    pub t_rp: u64,
    pub t_rc: u64,
    pub t_burst: u64,
    pub t_faw: u64,
    pub t_rrd: u64,
    /// NVM write-to-write delay, rank scope.
    pub t_wwd: u64,
    /// NVM write-to-activate delay, rank scope.
    pub t_wad: u64,
    /// NVM activate-to-write delay, rank scope.
    pub t_awd: u64,
    pub clock_period_ns: f64,
    pub e_act: f64,
    pub e_read_burst: f64,
    pub e_write_burst: f64,
    pub e_rowclone: f64,
    pub e_rowclone_zero: f64,
}

impl TimingProfile {
    /// Phase-change memory at 800 MHz. A 4 KiB-row FPM clone takes
    /// `2*tRCD + tRP = 72` cycles (90 ns) and 40 nJ; a bulk zero 50 nJ.
    pub fn pcm_default() -> Self {
        Self {
            kind: MemoryKind::Nvm,
            t_rcd: 22,
            t_ras: 22,
            t_rp: 28,
            t_rc: 50,
            t_burst: 4,
            t_faw: 24,
            t_rrd: 5,
            t_wwd: 8,
            t_wad: 30,
            t_awd: 6,
            clock_period_ns: 1.25,
            e_act: 20.0,
            e_read_burst: 1.0,
            e_write_burst: 8.0,
            e_rowclone: 40.0,
            e_rowclone_zero: 50.0,
        }
    }

    pub fn dram_default() -> Self {
        Self {
            kind: MemoryKind::Dram,
            t_rcd: 14,
            t_ras: 28,
            t_rp: 14,
            t_rc: 42,
            t_burst: 4,
            t_faw: 20,
            t_rrd: 4,
            t_wwd: 0,
            t_wad: 0,
            t_awd: 0,
            clock_period_ns: 1.25,
            e_act: 2.0,
            e_read_burst: 1.0,
            e_write_burst: 1.2,
            e_rowclone: 4.0,
            e_rowclone_zero: 4.0,
        }
    }

    pub fn validate(&self) -> Result<(), MemoryError> {
        let bad = |msg: alloc::string::String| Err(MemoryError::InvalidProfile(msg));
        if self.t_faw < self.t_rrd {
            return bad(format!("tFAW ({}) < tRRD ({})", self.t_faw, self.t_rrd));
        }
        if self.t_ras < self.t_rcd {
            return bad(format!("tRAS ({}) < tRCD ({})", self.t_ras, self.t_rcd));
        }
        if self.t_burst == 0 {
            return bad("tBURST must be at least one cycle".into());
        }
        if self.clock_period_ns.is_nan() || self.clock_period_ns <= 0.0 {
            return bad("clock period must be positive".into());
        }
        let energies = [
            self.e_act,
            self.e_read_burst,
            self.e_write_burst,
            self.e_rowclone,
            self.e_rowclone_zero,
        ];
        if energies.iter().any(|e| e.is_nan() || *e < 0.0) {
            return bad("energies must be non-negative".into());
        }
        match self.kind {
            MemoryKind::Dram => {
                if self.t_rc != self.t_ras + self.t_rp {
                    return bad(format!(
                        "DRAM tRC ({}) must equal tRAS + tRP ({})",
                        self.t_rc,
                        self.t_ras + self.t_rp
                    ));
                }
                if self.t_wwd + self.t_wad + self.t_awd != 0 {
                    return bad("tWWD/tWAD/tAWD apply to NVM profiles only".into());
                }
            }
            MemoryKind::Nvm => {
                if self.t_rc < self.t_rcd {
                    return bad(format!("tRC ({}) < tRCD ({})", self.t_rc, self.t_rcd));
                }
            }
        }
        Ok(())
    }

    pub fn rowclone_cycles(&self) -> u64 {
        2 * self.t_rcd + self.t_rp
    }

    pub fn cycles_to_ns(&self, cycles: f64) -> f64 {
        cycles * self.clock_period_ns
    }
}

/// DRAM reads restore the row, so a read occupies the bank for tRC; NVM
/// reads are non-destructive and cost tRCD + tBURST.
pub fn read_cycle_cycles(profile: &TimingProfile) -> u64 {
    match profile.kind {
        MemoryKind::Dram => profile.t_rc,
        MemoryKind::Nvm => profile.t_rcd + profile.t_burst,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TimingProfile::pcm_default().validate().unwrap();
        TimingProfile::dram_default().validate().unwrap();
    }

    #[test]
    fn read_cycle() {
        let nvm = TimingProfile::pcm_default();
        assert_eq!(read_cycle_cycles(&nvm), 26);
        let nvm0 = TimingProfile { t_burst: 0, ..nvm };
        assert_eq!(read_cycle_cycles(&nvm0), 22);
        let dram = TimingProfile {
            t_ras: 28,
            t_rp: 10,
            t_rc: 38,
            ..TimingProfile::dram_default()
        };
        dram.validate().unwrap();
        assert_eq!(read_cycle_cycles(&dram), 38);
    }

    #[test]
    fn dram_trc_must_match() {
        let p = TimingProfile {
            t_rc: 40,
            ..TimingProfile::dram_default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn faw_below_rrd_rejected() {
        let p = TimingProfile {
            t_faw: 2,
            ..TimingProfile::pcm_default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn default_pcm_rowclone_hits_ninety_ns() {
        let p = TimingProfile::pcm_default();
        assert_eq!(p.cycles_to_ns(p.rowclone_cycles() as f64), 90.0);
    }
}
