//! IEEE RTS-24 (one-area reliability test system) as distributed in the
//! MATPOWER `case24_ieee_rts` file, with classical-model machine data.

use super::{Branch, Bus, Generator, PowerSystem, DEFAULT_DAMPING, DEFAULT_XD_T};
use crate::error::Result;

/// Per-unit base of the published data.
const DATA_BASE_MVA: f64 = 100.0;

/// Machine parameters that the published steady-state case does not carry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ieee24Options {
    /// Damping on machine base.
    pub damping: f64,
    /// Transient reactance on machine base.
    pub xd_t: f64,
}

impl Default for Ieee24Options {
    fn default() -> Self {
        Ieee24Options { damping: DEFAULT_DAMPING, xd_t: DEFAULT_XD_T }
    }
}

// (bus, base kV, Pd MW, Qd MVAr, Bs MVAr)
const BUSES: [(usize, f64, f64, f64, f64); 24] = [
    (1, 138.0, 108.0, 22.0, 0.0),
    (2, 138.0, 97.0, 20.0, 0.0),
    (3, 138.0, 180.0, 37.0, 0.0),
    (4, 138.0, 74.0, 15.0, 0.0),
    (5, 138.0, 71.0, 14.0, 0.0),
    (6, 138.0, 136.0, 28.0, -100.0),
    (7, 138.0, 125.0, 25.0, 0.0),
    (8, 138.0, 171.0, 35.0, 0.0),
    (9, 138.0, 175.0, 36.0, 0.0),
    (10, 138.0, 195.0, 40.0, 0.0),
    (11, 230.0, 0.0, 0.0, 0.0),
    (12, 230.0, 0.0, 0.0, 0.0),
    (13, 230.0, 265.0, 54.0, 0.0),
    (14, 230.0, 194.0, 39.0, 0.0),
    (15, 230.0, 317.0, 64.0, 0.0),
    (16, 230.0, 100.0, 20.0, 0.0),
    (17, 230.0, 0.0, 0.0, 0.0),
    (18, 230.0, 333.0, 68.0, 0.0),
    (19, 230.0, 181.0, 37.0, 0.0),
    (20, 230.0, 128.0, 26.0, 0.0),
    (21, 230.0, 0.0, 0.0, 0.0),
    (22, 230.0, 0.0, 0.0, 0.0),
    (23, 230.0, 0.0, 0.0, 0.0),
    (24, 230.0, 0.0, 0.0, 0.0),
];

// (from, to, r, x, b) on 100 MVA
const BRANCHES: [(usize, usize, f64, f64, f64); 38] = [
    (1, 2, 0.0026, 0.0139, 0.4611),
    (1, 3, 0.0546, 0.2112, 0.0572),
    (1, 5, 0.0218, 0.0845, 0.0229),
    (2, 4, 0.0328, 0.1267, 0.0343),
    (2, 6, 0.0497, 0.1920, 0.0520),
    (3, 9, 0.0308, 0.1190, 0.0322),
    (3, 24, 0.0023, 0.0839, 0.0),
    (4, 9, 0.0268, 0.1037, 0.0281),
    (5, 10, 0.0228, 0.0883, 0.0239),
    (6, 10, 0.0139, 0.0605, 2.4590),
    (7, 8, 0.0159, 0.0614, 0.0166),
    (8, 9, 0.0427, 0.1651, 0.0447),
    (8, 10, 0.0427, 0.1651, 0.0447),
    (9, 11, 0.0023, 0.0839, 0.0),
    (9, 12, 0.0023, 0.0839, 0.0),
    (10, 11, 0.0023, 0.0839, 0.0),
    (10, 12, 0.0023, 0.0839, 0.0),
    (11, 13, 0.0061, 0.0476, 0.0999),
    (11, 14, 0.0054, 0.0418, 0.0879),
    (12, 13, 0.0061, 0.0476, 0.0999),
    (12, 23, 0.0124, 0.0966, 0.2030),
    (13, 23, 0.0111, 0.0865, 0.1818),
    (14, 16, 0.0050, 0.0389, 0.0818),
    (15, 16, 0.0022, 0.0173, 0.0364),
    (15, 21, 0.0063, 0.0490, 0.1030),
    (15, 21, 0.0063, 0.0490, 0.1030),
    (15, 24, 0.0067, 0.0519, 0.1091),
    (16, 17, 0.0033, 0.0259, 0.0545),
    (16, 19, 0.0030, 0.0231, 0.0485),
    (17, 18, 0.0018, 0.0144, 0.0303),
    (17, 22, 0.0135, 0.1053, 0.2212),
    (18, 21, 0.0033, 0.0259, 0.0545),
    (18, 21, 0.0033, 0.0259, 0.0545),
    (19, 20, 0.0051, 0.0396, 0.0833),
    (19, 20, 0.0051, 0.0396, 0.0833),
    (20, 23, 0.0028, 0.0216, 0.0455),
    (20, 23, 0.0028, 0.0216, 0.0455),
    (21, 22, 0.0087, 0.0678, 0.1424),
];

#[derive(Clone, Copy)]
enum Unit {
    U12,
    U20,
    U50,
    U76,
    U100,
    U155,
    U197,
    U350,
    U400,
    Condenser,
}

impl Unit {
    /// (MVA rating, inertia constant in seconds)
    fn rating(self) -> (f64, f64) {
        match self {
            Unit::U12 => (15.0, 2.9),
            Unit::U20 => (25.0, 1.5),
            Unit::U50 => (60.0, 3.0),
            Unit::U76 => (90.0, 3.0),
            Unit::U100 => (120.0, 3.5),
            Unit::U155 => (180.0, 4.0),
            Unit::U197 => (230.0, 3.5),
            Unit::U350 => (400.0, 4.0),
            Unit::U400 => (470.0, 5.0),
            Unit::Condenser => (250.0, 2.0),
        }
    }
}

// (bus, unit, Pg MW)
const MACHINES: [(usize, Unit, f64); 33] = [
    (1, Unit::U20, 10.0),
    (1, Unit::U20, 10.0),
    (1, Unit::U76, 76.0),
    (1, Unit::U76, 76.0),
    (2, Unit::U20, 10.0),
    (2, Unit::U20, 10.0),
    (2, Unit::U76, 76.0),
    (2, Unit::U76, 76.0),
    (7, Unit::U100, 80.0),
    (7, Unit::U100, 80.0),
    (7, Unit::U100, 80.0),
    (13, Unit::U197, 95.1),
    (13, Unit::U197, 95.1),
    (13, Unit::U197, 95.1),
    (14, Unit::Condenser, 0.0),
    (15, Unit::U12, 12.0),
    (15, Unit::U12, 12.0),
    (15, Unit::U12, 12.0),
    (15, Unit::U12, 12.0),
    (15, Unit::U12, 12.0),
    (15, Unit::U155, 155.0),
    (16, Unit::U155, 155.0),
    (18, Unit::U400, 400.0),
    (21, Unit::U400, 400.0),
    (22, Unit::U50, 50.0),
    (22, Unit::U50, 50.0),
    (22, Unit::U50, 50.0),
    (22, Unit::U50, 50.0),
    (22, Unit::U50, 50.0),
    (22, Unit::U50, 50.0),
    (23, Unit::U155, 155.0),
    (23, Unit::U155, 155.0),
    (23, Unit::U350, 350.0),
];

/// The RTS-24 case with default machine parameters.
pub fn build_ieee24() -> PowerSystem {
    build_ieee24_with(Ieee24Options::default()).expect("embedded RTS-24 data is valid")
}

/// The RTS-24 case re-expressed on a system base equal to the total machine
/// rating, so that the fleet inertia constant is the rating-weighted mean H.
pub fn build_ieee24_with(opts: Ieee24Options) -> Result<PowerSystem> {
    let s_base: f64 = MACHINES.iter().map(|(_, u, _)| u.rating().0).sum();
    let rescale = s_base / DATA_BASE_MVA;

    let buses = BUSES
        .iter()
        .map(|&(number, base_kv, pd, qd, bs)| Bus {
            number,
            base_kv,
            load_p: pd / s_base,
            // A fixed shunt is a constant-impedance load: -Bs absorbs reactive power.
            load_q: (qd - bs) / s_base,
            has_generator: false,
        })
        .collect();
    let branches = BRANCHES
        .iter()
        .map(|&(f, t, r, x, b)| Branch {
            from_bus: f - 1,
            to_bus: t - 1,
            r: r * rescale,
            x: x * rescale,
            b_shunt: b / rescale,
        })
        .collect();
    let generators = MACHINES
        .iter()
        .map(|&(bus, unit, pg)| {
            let (s_rated, h) = unit.rating();
            Generator {
                bus: bus - 1,
                s_rated,
                h,
                d: opts.damping,
                xd_t: opts.xd_t,
                p_set: pg / s_base,
            }
        })
        .collect();
    PowerSystem::new(buses, branches, generators, s_base, 60.0)
}
