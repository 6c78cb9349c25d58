//! Random task sets: UUnifast utilizations, log-uniform periods, a
//! criticality draw per task, and PIBS bound to a server of the same level.

use alloc::vec::Vec;

use num_traits::One;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::ModelError;
use crate::model::{CritLevel, Id, PibsSpec, SporadicServerSpec, TaskSet};
use crate::time::{ceil_ratio, time_ratio, Rational, Time, Util};

/// Utilizations are drawn on this grid (times the target's own denominator).
const UTIL_GRID: u64 = 1_000_000;
/// Periods are generated in these units of ticks.
pub const PERIOD_SCALE: Time = 1000;
const CRIT_RETRIES: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct GenParams {
    pub n_main: usize,
    pub n_io: usize,
    /// Total LO utilization of servers and PIBS together.
    pub total_util: Util,
    pub io_total_util: Util,
    pub crit_factor: Rational,
    pub p_hi: f64,
    /// Inclusive, before scaling by `PERIOD_SCALE`.
    pub period_range: (Time, Time),
    /// LO servers and PIBS keep a reduced budget in HI mode.
    pub extended: bool,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            n_main: 15,
            n_io: 5,
            total_util: Util::new(1, 2).unwrap(),
            io_total_util: Util::new(1, 20).unwrap(),
            crit_factor: Rational::from_integer(2),
            p_hi: 0.5,
            period_range: (1, 100),
            extended: false,
            seed: 1,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_main == 0 {
            return Err(ModelError::InvalidParams(
                "at least one main task is needed",
            ));
        }
        if self.n_io > 0 && self.io_total_util >= self.total_util {
            return Err(ModelError::InvalidParams(
                "I/O utilization must be below the total",
            ));
        }
        if self.crit_factor < Rational::one() {
            return Err(ModelError::InvalidParams(
                "criticality factor must be at least 1",
            ));
        }
        if !(0.0..=1.0).contains(&self.p_hi) {
            return Err(ModelError::InvalidParams("p_hi must be a probability"));
        }
        let (lo, hi) = self.period_range;
        if lo == 0 || lo > hi {
            return Err(ModelError::InvalidParams("bad period range"));
        }
        Ok(())
    }

    /// The parameters for the `index`-th set of a batch.
    pub fn for_index(&self, index: u64) -> GenParams {
        GenParams {
            seed: self.seed ^ index,
            ..self.clone()
        }
    }

    fn main_util(&self) -> Result<Util, ModelError> {
        if self.n_io == 0 {
            return Ok(self.total_util);
        }
        let r = self.total_util.as_rational() - self.io_total_util.as_rational();
        let n = u64::try_from(*r.numer())
            .map_err(|_| ModelError::InvalidParams("utilization too fine"))?;
        let d = u64::try_from(*r.denom())
            .map_err(|_| ModelError::InvalidParams("utilization too fine"))?;
        Util::new(n, d)
    }
}

/// `n` utilizations summing exactly to `total`. The draw is done in floating
/// point and snapped to a grid; the last element takes the remainder.
pub fn uunifast<R: Rng + ?Sized>(n: usize, total: Util, rng: &mut R) -> Vec<Util> {
    assert!(n >= 1);
    let grid = num_integer::lcm(total.denom(), UTIL_GRID);
    let mut left = total.numer() * (grid / total.denom());
    if left < n as u64 {
        panic!("total utilization {total} is too small to split {n} ways");
    }
    let mut out = Vec::with_capacity(n);
    let mut sum = total.to_f64();
    for i in 1..n {
        let next = sum * libm::pow(rng.gen::<f64>(), 1.0 / (n - i) as f64);
        let want = libm::round((sum - next) * grid as f64) as u64;
        let units = want.clamp(1, left - (n - i) as u64);
        out.push(Util::new(units, grid).unwrap());
        left -= units;
        sum = next;
    }
    out.push(Util::new(left, grid).unwrap());
    out
}

/// Integer period, log-uniform on `[lo, hi]`.
pub fn log_uniform<R: Rng + ?Sized>(lo: Time, hi: Time, rng: &mut R) -> Time {
    let (a, b) = (libm::log(lo as f64), libm::log(hi as f64));
    let x = libm::exp(a + (b - a) * rng.gen::<f64>());
    (libm::round(x) as Time).clamp(lo, hi)
}

fn scale(c: Time, factor: &Rational) -> Time {
    ceil_ratio(&(time_ratio(c) * factor))
}

fn scale_util(u: Util, factor: &Rational) -> Util {
    let r = u.as_rational() * factor;
    if r >= Rational::one() {
        return Util::ONE;
    }
    Util::new(*r.numer() as u64, *r.denom() as u64).unwrap()
}

pub fn generate(params: &GenParams) -> Result<TaskSet, ModelError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let main = uunifast(params.n_main, params.main_util()?, &mut rng);
    let io = if params.n_io > 0 {
        uunifast(params.n_io, params.io_total_util, &mut rng)
    } else {
        Vec::new()
    };
    let (lo, hi) = params.period_range;
    let periods: Vec<Time> = (0..params.n_main)
        .map(|_| log_uniform(lo * PERIOD_SCALE, hi * PERIOD_SCALE, &mut rng))
        .collect();

    let draw = |rng: &mut ChaCha8Rng, n: usize| -> Vec<CritLevel> {
        (0..n)
            .map(|_| {
                if rng.gen::<f64>() < params.p_hi {
                    CritLevel::Hi
                } else {
                    CritLevel::Lo
                }
            })
            .collect()
    };
    let mut crits = Vec::new();
    let mut pibs_crits = Vec::new();
    let mut ok = false;
    for _ in 0..CRIT_RETRIES {
        crits = draw(&mut rng, params.n_main);
        pibs_crits = draw(&mut rng, params.n_io);
        if pibs_crits.iter().all(|c| crits.contains(c)) {
            ok = true;
            break;
        }
    }
    if !ok {
        return Err(ModelError::Infeasible(
            "no server of the PIBS's criticality",
        ));
    }

    let cf = &params.crit_factor;
    let servers: Vec<SporadicServerSpec> = (0..params.n_main)
        .map(|k| {
            let t = periods[k];
            let c = main[k].ceil_mul(t).max(1);
            let s = SporadicServerSpec::new(k as Id + 1, t, c, crits[k]);
            match crits[k] {
                CritLevel::Hi => s.with_hi(scale(c, cf)),
                CritLevel::Lo if params.extended => s.with_hi(ceil_ratio(&(time_ratio(c) / cf))),
                CritLevel::Lo => s,
            }
        })
        .collect();

    let mut pibs = Vec::with_capacity(params.n_io);
    let mut bindings = Vec::with_capacity(params.n_io);
    for (k, (&u, &crit)) in io.iter().zip(&pibs_crits).enumerate() {
        let id = (params.n_main + k) as Id + 1;
        let p = PibsSpec::new(id, u, crit);
        pibs.push(match crit {
            CritLevel::Hi => p.with_hi(scale_util(u, cf)),
            CritLevel::Lo if params.extended => p.with_hi(scale_util(u, &cf.recip())),
            CritLevel::Lo => p,
        });
        let same: Vec<Id> = servers
            .iter()
            .filter(|s| s.criticality == crit)
            .map(|s| s.id)
            .collect();
        bindings.push((id, *same.choose(&mut rng).unwrap()));
    }

    let mut set = TaskSet::new(servers, pibs);
    for (p, s) in bindings {
        set = set.bind(p, s);
    }
    let set = set.assign_rate_monotonic();
    set.validate()?;
    Ok(set)
}

/// Replace every PIBS by a Sporadic Server with the period of the server it
/// is bound to and `C = ⌈U·T⌉` per mode, placed just below that server.
pub fn pibs_to_ss(set: &TaskSet) -> Result<TaskSet, ModelError> {
    let mut order: Vec<&SporadicServerSpec> = set.servers.iter().collect();
    order.sort_by_key(|s| (s.priority, s.id));
    let mut servers = Vec::with_capacity(set.servers.len() + set.pibs.len());
    for p in &set.pibs {
        if !set.bindings.contains_key(&p.id) {
            return Err(ModelError::UnboundPibs(p.id));
        }
    }
    for s in order {
        servers.push(s.clone().with_priority(servers.len() as u32));
        for p in set.pibs.iter().filter(|p| set.bindings[&p.id] == s.id) {
            let c = p.util_lo.ceil_mul(s.period).max(1);
            let mut conv = SporadicServerSpec::new(p.id, s.period, c, p.criticality);
            conv.capacity_hi = p.util_hi.map(|u| u.ceil_mul(s.period).max(1));
            servers.push(conv.with_priority(servers.len() as u32));
        }
    }
    let out = TaskSet::new(servers, Vec::new());
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u(n: u64, d: u64) -> Util {
        Util::new(n, d).unwrap()
    }

    #[test]
    fn uunifast_sums_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(uunifast(1, u(3, 7), &mut rng), alloc::vec![u(3, 7)]);
        for n in [2, 5, 20] {
            let v = uunifast(n, u(19, 20), &mut rng);
            let s: Rational = v.iter().map(|x| x.as_rational()).sum();
            assert_eq!(s, u(19, 20).as_rational());
        }
    }

    #[test]
    fn uunifast_regression_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v: Vec<u64> = uunifast(20, u(1, 2), &mut rng)
            .iter()
            .map(|x| x.numer() * (UTIL_GRID / x.denom()))
            .collect();
        assert_eq!(v.iter().sum::<u64>(), UTIL_GRID / 2);
        assert_eq!(v, REGRESSION);
    }

    // pinned from the first run of this generator
    const REGRESSION: [u64; 20] = [
        23385, 62288, 12401, 36362, 29450, 8103, 18963, 44806, 3194, 8909, 19572, 15440, 60985,
        31088, 18295, 29084, 233, 3472, 3912, 70058,
    ];

    #[test]
    fn defaults_shape() {
        let set = generate(&GenParams::default()).unwrap();
        assert_eq!(set.servers.len(), 15);
        assert_eq!(set.pibs.len(), 5);
        assert_eq!(set.bindings.len(), 5);
        for (p, s) in &set.bindings {
            let p = set.pibs_by_id(*p).unwrap();
            assert_eq!(p.criticality, set.server(*s).unwrap().criticality);
        }
        let io: Rational = set.pibs.iter().map(|p| p.util_lo.as_rational()).sum();
        assert_eq!(io, u(1, 20).as_rational());
        for s in &set.servers {
            assert!((1000..=100_000).contains(&s.period));
        }
    }

    #[test]
    fn all_hi_and_collapse() {
        let all_hi = GenParams {
            p_hi: 1.0,
            ..GenParams::default()
        };
        let set = generate(&all_hi).unwrap();
        assert!(set.servers.iter().all(|s| s.criticality == CritLevel::Hi));
        let flat = GenParams {
            crit_factor: Rational::one(),
            ..all_hi
        };
        let set = generate(&flat).unwrap();
        assert!(set
            .servers
            .iter()
            .all(|s| s.capacity_hi == Some(s.capacity_lo)));
        assert!(set.pibs.iter().all(|p| p.util_hi == Some(p.util_lo)));
    }

    #[test]
    fn extended_keeps_reduced_lo_budgets() {
        let p = GenParams {
            extended: true,
            p_hi: 0.0,
            ..GenParams::default()
        };
        let set = generate(&p).unwrap();
        for s in &set.servers {
            let hi = s.capacity_hi.unwrap();
            assert!(hi >= 1 && hi <= s.capacity_lo);
        }
        assert!(set
            .pibs
            .iter()
            .all(|p| p.util_hi.unwrap().as_rational() * 2 == p.util_lo.as_rational()));
    }

    #[test]
    fn conversion_examples() {
        let set = TaskSet::new(
            alloc::vec![SporadicServerSpec::new(1, 16, 8, CritLevel::Lo)],
            alloc::vec![PibsSpec::new(2, u(1, 4), CritLevel::Lo)],
        )
        .bind(2, 1);
        let conv = pibs_to_ss(&set).unwrap();
        assert_eq!(conv.servers[1].capacity_lo, 4);
        assert_eq!(conv.servers[1].period, 16);
        assert!(conv.servers[0].priority < conv.servers[1].priority);
        let plain = TaskSet::new(
            alloc::vec![SporadicServerSpec::new(1, 16, 8, CritLevel::Lo)],
            alloc::vec![],
        );
        assert_eq!(pibs_to_ss(&plain).unwrap(), plain);
        let unbound = TaskSet::new(
            plain.servers.clone(),
            alloc::vec![PibsSpec::new(2, u(1, 4), CritLevel::Lo)],
        );
        assert!(pibs_to_ss(&unbound).is_err());
    }
}
