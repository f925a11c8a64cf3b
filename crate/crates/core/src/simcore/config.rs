use crate::citygrid::TravelModel;
use crate::demand::{two_peak_patterns, DemandPattern, DiurnalSchedule, FareModel};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::qdispatch::{CostModel, DecaySchedule, RewardWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternPreset {
    /// Peak flow from a north-west hub to a south-east hub, and its
    /// half-rate reverse.
    TwoPeak,
    /// Every zone at the same rate with uniform destinations.
    Uniform,
}

impl PatternPreset {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "two_peak" => Ok(PatternPreset::TwoPeak),
            "uniform" => Ok(PatternPreset::Uniform),
            other => Err(Error::config(
                "demand.patterns",
                format!("unknown preset `{other}` (expected two_peak or uniform)"),
            )),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PatternPreset::TwoPeak => "two_peak",
            PatternPreset::Uniform => "uniform",
        }
    }

    pub fn pattern_count(self) -> usize {
        match self {
            PatternPreset::TwoPeak => 2,
            PatternPreset::Uniform => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FleetConfig {
    pub size: u32,
    pub capacity: u32,
    /// km per fuel unit.
    pub mileage: f64,
    /// Vehicles enter uniformly over `0..entry_ticks`.
    pub entry_ticks: u64,
    pub max_working_minutes: u64,
    /// Idle vehicles are re-dispatched once idle for more than this.
    pub idle_redispatch: u64,
}

impl Default for FleetConfig {
    fn default() -> Self {
        FleetConfig {
            size: 200,
            capacity: 4,
            mileage: 10.0,
            entry_ticks: 60,
            max_working_minutes: 21 * 60,
            idle_redispatch: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemandConfig {
    pub k_true: usize,
    pub schedule: Vec<(u64, usize)>,
    pub preset: PatternPreset,
    /// Total requests per tick for the busiest pattern.
    pub rate: f64,
    /// Fixed demand stream seed; derived from the run seed when absent.
    pub seed: Option<u64>,
    pub fares: FareModel,
    pub forecast_window: usize,
}

impl Default for DemandConfig {
    fn default() -> Self {
        DemandConfig {
            k_true: 2,
            schedule: vec![(480, 0), (480, 1), (480, 0)],
            preset: PatternPreset::TwoPeak,
            rate: 8.0,
            seed: None,
            fares: FareModel::default(),
            forecast_window: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RlConfig {
    pub weights: RewardWeights,
    pub eta: f64,
    pub k: usize,
    pub decay: DecaySchedule,
    pub gas_price: f64,
}

impl Default for RlConfig {
    fn default() -> Self {
        RlConfig {
            weights: RewardWeights::default(),
            eta: 0.9,
            k: 7,
            decay: DecaySchedule::default(),
            gas_price: CostModel::default().gas_price,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpdConfig {
    pub enabled: bool,
    pub threshold: f64,
    pub window_ticks: u64,
    pub min_segment: Option<usize>,
    pub epsilon: f64,
    /// Ticks with a smaller in-service share of the fleet are not fed to
    /// the detector.
    pub min_in_service: f64,
}

impl Default for CpdConfig {
    fn default() -> Self {
        CpdConfig {
            enabled: true,
            threshold: 10.0,
            window_ticks: 10,
            min_segment: None,
            epsilon: 1e-6,
            min_in_service: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub grid: TravelModel,
    pub match_radius: u32,
    pub max_detour_ratio: f64,
    pub fleet: FleetConfig,
    pub demand: DemandConfig,
    pub rl: RlConfig,
    pub cpd: CpdConfig,
    pub ticks: u64,
    pub warmup_ticks: u64,
    pub request_ttl: u64,
    pub day_minutes: u64,
    pub exec: Exec,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            grid: TravelModel::new(20, 20, 0.8, 1.0).expect("default grid is valid"),
            match_radius: 6,
            max_detour_ratio: f64::INFINITY,
            fleet: FleetConfig::default(),
            demand: DemandConfig::default(),
            rl: RlConfig::default(),
            cpd: CpdConfig::default(),
            ticks: 2880,
            warmup_ticks: 20,
            request_ttl: 10,
            day_minutes: 1440,
            exec: Exec::default(),
        }
    }
}

impl SimConfig {
    /// Single Q-table and no change detection.
    pub fn baseline(mut self) -> Self {
        self.rl.k = 1;
        self.cpd.enabled = false;
        self
    }

    pub fn cost_model(&self) -> CostModel {
        CostModel {
            mileage: self.fleet.mileage,
            gas_price: self.rl.gas_price,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let positive = |ok: bool, key: &str, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(key, what))
            }
        };
        positive(self.fleet.capacity > 0, "fleet.capacity", "must be positive")?;
        positive(
            self.fleet.mileage.is_finite() && self.fleet.mileage > 0.0,
            "fleet.mileage",
            "must be positive",
        )?;
        positive(self.fleet.max_working_minutes > 0, "fleet.max_working_minutes", "must be positive")?;
        positive(
            self.fleet.max_working_minutes <= self.day_minutes,
            "fleet.max_working_minutes",
            "cannot exceed the day length",
        )?;
        positive(
            self.fleet.entry_ticks <= self.day_minutes,
            "fleet.entry_ticks",
            "cannot exceed the day length",
        )?;
        positive(
            self.max_detour_ratio >= 1.0,
            "routing.max_detour_ratio",
            "must be at least 1",
        )?;
        positive(
            self.demand.rate.is_finite() && self.demand.rate >= 0.0,
            "demand.rate",
            "must be finite and nonnegative",
        )?;
        positive(self.demand.k_true >= 1, "demand.k_true", "must be at least 1")?;
        positive(
            self.demand.k_true <= self.demand.preset.pattern_count(),
            "demand.k_true",
            "exceeds the number of patterns the preset provides",
        )?;
        positive(
            self.demand.fares.base >= 0.0 && self.demand.fares.per_km >= 0.0,
            "fare.base",
            "fares must be nonnegative",
        )?;
        positive(self.demand.forecast_window > 0, "demand.forecast_window", "must be positive")?;
        self.schedule()?;
        RewardWeights::new(self.rl.weights.beta)?;
        positive(self.rl.eta > 0.0 && self.rl.eta < 1.0, "rl.eta", "must lie in (0, 1)")?;
        positive(self.rl.k >= 1, "rl.k", "must be at least 1")?;
        positive(
            self.rl.gas_price.is_finite() && self.rl.gas_price >= 0.0,
            "rl.gas_price",
            "must be finite and nonnegative",
        )?;
        self.rl.decay.validate()?;
        positive(
            self.cpd.threshold.is_finite(),
            "cpd.threshold",
            "must be finite",
        )?;
        positive(self.cpd.window_ticks > 0, "cpd.window_ticks", "must be positive")?;
        positive(
            self.cpd.epsilon > 0.0 && self.cpd.epsilon < 1.0,
            "cpd.epsilon",
            "must lie in (0, 1)",
        )?;
        positive(
            (0.0..=1.0).contains(&self.cpd.min_in_service),
            "cpd.min_in_service",
            "must lie in [0, 1]",
        )?;
        if let Some(m) = self.cpd.min_segment {
            positive(m >= 2, "cpd.min_segment", "must be at least 2")?;
        }
        positive(self.request_ttl > 0, "sim.request_ttl", "must be positive")?;
        positive(self.day_minutes > 0, "sim.day_minutes", "must be positive")?;
        Ok(())
    }

    pub fn schedule(&self) -> Result<DiurnalSchedule> {
        DiurnalSchedule::new(self.demand.schedule.clone(), self.demand.k_true, true)
    }

    pub fn patterns(&self) -> Result<Vec<DemandPattern>> {
        match self.demand.preset {
            PatternPreset::TwoPeak => two_peak_patterns(&self.grid, self.demand.rate),
            PatternPreset::Uniform => Ok(vec![DemandPattern::uniform(&self.grid, self.demand.rate)?]),
        }
    }

    /// First tick fed to the change detector: after warm-up and after the
    /// fleet has finished entering.
    pub fn cpd_start(&self) -> u64 {
        self.warmup_ticks.max(self.fleet.entry_ticks)
    }
}
