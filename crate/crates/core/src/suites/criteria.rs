use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::{judge, SuiteError, SuiteOptions};
use crate::analytic::KappaFunction;
use crate::cascade::{fixed_point_check, grow, grow_until, intrinsic_martingale, time_slice, PROXY_GENERATION};
use crate::duality::{build_cut_process, reverse};
use crate::engine::{
    energy_costs, exit_samples, extinction_time, generator_additive, run, run_replicas, run_with, write_trajectory_csv,
    CostSpec, EventLog, Observer, Population, Screening, SimConfig, SizeFunctional,
};
use crate::laws::{DislocationLaw, ErosionParams, Estimate};
use crate::par::{map_replicas_sequential, try_map_replicas};
use crate::partition::{paintbox, partition_process, tagged_path, IntervalFragmentation, PartitionOfN};
use crate::stats::{
    chi2_homogeneity, chi2_test, clt_functional, ks_p_value, ks_statistic, ks_two_sample, largest_rate,
    lln_functional, scaled_moment, weighted_ks, ReportRow, WeightedEmpirical,
};
use crate::types::{MassPartition, RngStream};

type Rows = Result<Vec<ReportRow>, SuiteError>;

/// Laws with hand-derived `E Σ s_i^p`.
fn closed_form_laws() -> Result<Vec<(DislocationLaw, fn(f64) -> f64)>, SuiteError> {
    Ok(vec![
        (DislocationLaw::uniform_binary(), |p| 2.0 / (p + 1.0)),
        (DislocationLaw::lossy_binary(), |p| (1.0 - p).exp2() / (p + 1.0)),
        (DislocationLaw::deterministic_binary(0.3)?, |p| 0.3f64.powf(p) + 0.7f64.powf(p)),
        (DislocationLaw::dirichlet(3, 1.0)?, |p| 6.0 / ((p + 1.0) * (p + 2.0))),
    ])
}

fn conservative_laws() -> Result<Vec<DislocationLaw>, SuiteError> {
    Ok(closed_form_laws()?
        .into_iter()
        .map(|(l, _)| l)
        .filter(|l| l.metadata().conservative)
        .collect())
}

fn snapshot_values(cfg: &SimConfig, replicas: usize, f: impl Fn(&MassPartition) -> f64 + Sync) -> Result<Vec<Vec<f64>>, SuiteError> {
    Ok(try_map_replicas(replicas, |r| {
        run(cfg, r as u64).map(|log| log.snapshots.iter().map(|s| f(&s.partition)).collect())
    })?)
}

struct Weighted {
    replica: u64,
    out: Vec<WeightedEmpirical>,
}

impl Observer for Weighted {
    fn on_snapshot(&mut self, time: f64, population: &Population<'_>) {
        self.out.push(WeightedEmpirical::from_population(population, time, self.replica));
    }
}

/// Weighted empirical measure at the last snapshot of every replica.
fn weighted_samples(cfg: &SimConfig, replicas: usize) -> Result<Vec<WeightedEmpirical>, SuiteError> {
    Ok(try_map_replicas(replicas, |r| {
        let mut w = Weighted {
            replica: r as u64,
            out: Vec::new(),
        };
        run_with(cfg, r as u64, &mut w).map(|_| w.out.pop().expect("a snapshot was requested"))
    })?)
}

fn mean_row(id: &str, values: &[f64], expected: f64) -> Result<ReportRow, SuiteError> {
    let e = Estimate::from_samples(values);
    judge(id, e.value, expected, Some(e.std_err), None)
}

pub(super) fn ac1() -> Rows {
    let ps = [1.0, 1.5, 2.0, 3.0];
    let mut kappa_err = 0.0f64;
    let mut sigma_err = 0.0f64;
    let mut at_one = 0.0f64;
    for (law, m) in closed_form_laws()? {
        let k = KappaFunction::without_erosion(law.clone());
        for p in ps {
            kappa_err = kappa_err.max((k.kappa(p)? - (1.0 - m(p))).abs());
            sigma_err = sigma_err.max((law.sigma_moment(p)?.value - m(p)).abs());
        }
        if law.metadata().conservative {
            at_one = at_one.max(k.kappa(1.0)?.abs());
        }
    }
    Ok(vec![
        judge("AC1.kappa_closed_forms", kappa_err, 0.0, None, None)?,
        judge("AC1.sigma_closed_forms", sigma_err, 0.0, None, None)?,
        judge("AC1.kappa_at_one_conservative", at_one, 0.0, None, None)?,
    ])
}

/// Root of `1 − 2^{1−p}/(p+1)` by plain bisection on `[0, 1]`.
fn lossy_root() -> f64 {
    let f = |p: f64| 1.0 - (1.0 - p).exp2() / (p + 1.0);
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub(super) fn ac2() -> Rows {
    let mut worst = 0.0f64;
    for law in conservative_laws()? {
        worst = worst.max((KappaFunction::without_erosion(law).malthusian()? - 1.0).abs());
    }
    let lossy = KappaFunction::without_erosion(DislocationLaw::lossy_binary()).malthusian()?;
    let k = KappaFunction::without_erosion(DislocationLaw::uniform_binary());
    let pb = k.p_bar()?;
    Ok(vec![
        judge("AC2.p_star_conservative", worst, 0.0, None, None)?,
        judge("AC2.p_star_lossy", lossy, lossy_root(), None, None)?,
        judge("AC2.p_bar_uniform", pb, 1.0 + 2f64.sqrt(), None, None)?,
        judge("AC2.p_bar_tangency", k.kappa(pb)? / pb - k.kappa_prime(pb)?, 0.0, None, None)?,
    ])
}

pub(super) fn ac3(opts: &SuiteOptions) -> Rows {
    let n = opts.replicas(10_000);
    let law = DislocationLaw::uniform_binary();
    let cfg = SimConfig::new(law.clone(), 0.0, 2.0)
        .with_snapshots(vec![1.0, 2.0])
        .with_seed(opts.seed_for(0));
    let sums = snapshot_values(&cfg, n, |s| s.power_sum(2.0))?;
    let at = |k: usize| sums.iter().map(|v| v[k]).collect::<Vec<f64>>();
    let tagged = |seed: u64, c: f64| -> Result<Vec<f64>, SuiteError> {
        let cfg = SimConfig::new(law.clone(), 0.0, 3.0)
            .with_erosion(ErosionParams::new(c)?)
            .with_seed(seed);
        Ok(try_map_replicas(n, |r| tagged_path(&cfg, 3.0, r as u64).map(|p| p.size_at(3.0)))?)
    };
    Ok(vec![
        mean_row("AC3.sum_sq_t1", &at(0), (-1.0f64 / 3.0).exp())?,
        mean_row("AC3.sum_sq_t2", &at(1), (-2.0f64 / 3.0).exp())?,
        mean_row("AC3.tagged_t3", &tagged(opts.seed_for(1), 0.0)?, (-1.0f64).exp())?,
        mean_row("AC3.tagged_t3_erosion", &tagged(opts.seed_for(2), 0.1)?, (-1.6f64).exp())?,
    ])
}

pub(super) fn ac4(opts: &SuiteOptions) -> Rows {
    let law = DislocationLaw::uniform_binary();
    let closed = |t: f64| if t == 0.0 { 1.0 } else { 2.0 * ((-t).exp() - 1.0 + t) / (t * t) };
    let cfg = SimConfig::new(law.clone(), 1.0, 4.0)
        .with_snapshots(vec![4.0])
        .with_seed(opts.seed_for(0));
    let sums: Vec<f64> = snapshot_values(&cfg, opts.replicas(10_000), |s| s.power_sum(2.0))?
        .into_iter()
        .map(|v| v[0])
        .collect();
    let k = KappaFunction::without_erosion(law);
    let mut worst = 0.0f64;
    for i in 0..=100 {
        let t = i as f64 * 0.1;
        worst = worst.max((k.moment_series(2.0, t, 1.0)? - closed(t)).abs());
    }
    Ok(vec![
        mean_row("AC4.sum_sq_t4", &sums, closed(4.0))?,
        judge("AC4.moment_series", worst, 0.0, None, None)?,
    ])
}

pub(super) fn ac5(opts: &SuiteOptions) -> Rows {
    let t = 50.0;
    let cfg = SimConfig::new(DislocationLaw::uniform_binary(), 1.0, t)
        .with_threshold(1e-6)
        .with_snapshots(vec![t])
        .with_seed(opts.seed_for(0));
    let samples = weighted_samples(&cfg, opts.replicas(2000))?;
    let first = scaled_moment(&samples, 1.0, 1.0, 1)?;
    let second = scaled_moment(&samples, 1.0, 1.0, 2)?;
    Ok(vec![
        judge("AC5.scaled_sum_sq", first.value, 2.0, Some(first.std_err), None)?,
        judge("AC5.scaled_moment_k2", second.value, 6.0, Some(second.std_err), None)?,
    ])
}

pub(super) fn ac6(opts: &SuiteOptions) -> Rows {
    let t = 30.0;
    let cfg = SimConfig::new(DislocationLaw::uniform_binary(), 0.0, t)
        .with_screening(Screening::Roulette {
            epsilon: 1e-5,
            exponent: 1.0,
        })
        .with_snapshots(vec![t])
        .with_seed(opts.seed_for(0));
    let samples = weighted_samples(&cfg, opts.replicas(20))?;
    let lln = lln_functional(&samples, 1.0, |x| x)?;
    let clt = clt_functional(&samples, 1.0, 0.5)?;
    Ok(vec![
        judge("AC6.lln_mean", lln.value, -0.5, Some(lln.std_err), None)?,
        judge("AC6.clt_variance", clt.variance.value, 0.5, Some(clt.variance.std_err), None)?,
        judge("AC6.clt_mean", clt.mean.value, 0.0, Some(clt.mean.std_err), None)?,
    ])
}

pub(super) fn ac7(opts: &SuiteOptions) -> Rows {
    let t = 30.0;
    let eps = 1e-5;
    let law = DislocationLaw::uniform_binary();
    let cfg = SimConfig::new(law.clone(), 0.0, t)
        .with_threshold(eps)
        .with_snapshots(vec![t])
        .with_seed(opts.seed_for(0));
    let samples = weighted_samples(&cfg, opts.replicas(50))?;
    let rate = largest_rate(&samples, &KappaFunction::without_erosion(law), Some(eps))?;
    Ok(vec![judge(
        "AC7.largest_rate",
        rate.value,
        -(3.0 - 2.0 * 2f64.sqrt()),
        Some(rate.std_err),
        None,
    )?])
}

pub(super) fn ac8(opts: &SuiteOptions) -> Rows {
    let mut worst = 0.0f64;
    for law in conservative_laws()? {
        let tree = grow(&law, 0.0, 12, opts.seed_for(0), 0)?;
        let m = intrinsic_martingale(&tree, 1.0);
        for n in 0..=12 {
            worst = worst.max((m.value(n).unwrap_or(f64::NAN) - 1.0).abs());
        }
    }
    let lossy = DislocationLaw::lossy_binary();
    let p_star = KappaFunction::without_erosion(lossy.clone()).malthusian()?;
    let martingale = |gen: usize, seed: u64, n: usize| -> Result<Vec<f64>, SuiteError> {
        Ok(try_map_replicas(n, |r| {
            grow(&lossy, 0.0, gen, seed, r as u64).map(|tree| intrinsic_martingale(&tree, p_star).value(gen).unwrap_or(f64::NAN))
        })?)
    };
    let m5 = martingale(5, opts.seed_for(1), opts.replicas(10_000))?;
    let direct = martingale(PROXY_GENERATION, opts.seed_for(2), 2000)?;
    let pool = martingale(PROXY_GENERATION, opts.seed_for(3), 4000)?;
    let mut rng = RngStream::new(opts.seed_for(4), 0);
    let fp = fixed_point_check(&direct, &pool, &lossy, p_star, 20_000, 0.05, &mut rng)?;
    Ok(vec![
        judge("AC8.conservative_martingale", worst, 0.0, None, None)?,
        mean_row("AC8.lossy_mean", &m5, 1.0)?,
        judge("AC8.fixed_point_ks", fp.statistic, 0.0, None, Some(fp.p_value))?,
    ])
}

pub(super) fn ac9(opts: &SuiteOptions) -> Rows {
    let cfg = SimConfig::new(DislocationLaw::uniform_binary(), 0.0, 1.0)
        .with_seed(opts.seed_for(0))
        .with_replicas(opts.replicas(200));
    let mean = |cost: &CostSpec, eps: f64| -> Result<f64, SuiteError> {
        Ok(Estimate::from_samples(&energy_costs(&cfg, cost, eps)?).value)
    };
    let unit = mean(&CostSpec::unit(0.0), 1e-3)? * 1e-3;
    let sq = CostSpec::unit(2.0);
    let e = [mean(&sq, 1e-2)?, mean(&sq, 1e-3)?, mean(&sq, 1e-4)?];
    let change = |a: f64, b: f64| (b - a).abs() / a.abs();
    Ok(vec![
        judge("AC9.unit_cost", unit, 2.0, None, None)?,
        judge("AC9.beta2_change_1e-2_1e-3", change(e[0], e[1]), 0.0, None, None)?,
        judge("AC9.beta2_change_1e-3_1e-4", change(e[1], e[2]), 0.0, None, None)?,
    ])
}

pub(super) fn ac10(opts: &SuiteOptions) -> Rows {
    let cfg = SimConfig::new(DislocationLaw::uniform_binary(), 0.0, 1.0).with_seed(opts.seed_for(0));
    let samples = try_map_replicas(opts.replicas(200), |r| exit_samples(&cfg, 1e-3, r as u64))?;
    let totals: Vec<f64> = samples.iter().map(|s| s.total_weight()).collect();
    let atoms: Vec<f64> = samples.iter().flat_map(|s| s.atoms.iter().copied()).collect();
    let weights: Vec<f64> = samples.iter().flat_map(|s| s.weights.iter().copied()).collect();
    let ks = weighted_ks(&atoms, &weights, |x| (x * x).clamp(0.0, 1.0), 0.05)?;
    Ok(vec![
        judge("AC10.weighted_ks", ks.statistic, 0.0, None, Some(ks.p_value))?,
        judge("AC10.total_weight", Estimate::from_samples(&totals).value, 1.0, None, None)?,
    ])
}

pub(super) fn ac11(opts: &SuiteOptions) -> Rows {
    let n = 10_000;
    let s = MassPartition::rank(&[0.5, 1.0 / 3.0]).expect("valid masses");
    let mut rng = RngStream::new(opts.seed_for(0), 0);
    let p = paintbox(&s, n, &mut rng);
    let mut sizes: Vec<usize> = p.blocks().iter().map(|b| b.len()).filter(|&l| l > 1).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes.resize(2, 0);
    let freq = |k: usize| sizes[k] as f64 / n as f64;

    let law = DislocationLaw::uniform_binary();
    let times = [0.0, 0.5, 1.0, 2.0];
    let cfg = SimConfig::new(law.clone(), 0.5, 2.0).with_seed(opts.seed_for(1));
    let broken: usize = try_map_replicas(200, |r| {
        partition_process(&cfg, 12, &times, r as u64)
            .map(|ps| ps.windows(2).filter(|w| !w[1].refines(&w[0])).count() + usize::from(ps[0] != PartitionOfN::single_block(12)))
    })?
    .into_iter()
    .sum();

    let cfg3 = SimConfig::new(law, 0.0, 1.0).with_seed(opts.seed_for(2));
    let parts = try_map_replicas(opts.replicas(6000), |r| partition_process(&cfg3, 3, &[1.0], r as u64))?;
    let keys = ["{1,2,3}", "{1,2|3}", "{1,3|2}", "{1|2,3}", "{1|2|3}"];
    let mut a = [0u64; 5];
    let mut b = [0u64; 5];
    for ps in &parts {
        let p = &ps[0];
        let idx = |q: &PartitionOfN| keys.iter().position(|k| *k == q.to_string()).expect("five partitions of 3");
        a[idx(p)] += 1;
        b[idx(&p.relabel(&[2, 3, 1]))] += 1;
    }
    let exch = chi2_homogeneity(&a, &b, 0.01)?;
    Ok(vec![
        judge("AC11.frequency_first", freq(0), 0.5, None, None)?,
        judge("AC11.frequency_second", freq(1), 1.0 / 3.0, None, None)?,
        judge("AC11.singleton_fraction", p.singleton_count() as f64 / n as f64, 1.0 / 6.0, None, None)?,
        judge("AC11.refinement", broken as f64, 0.0, None, None)?,
        judge("AC11.exchangeability", exch.statistic, 0.0, None, Some(exch.p_value))?,
    ])
}

pub(super) fn ac12(opts: &SuiteOptions) -> Rows {
    let t = 1.0;
    let n = opts.replicas(5000);
    let law = DislocationLaw::uniform_binary();
    let seed = opts.seed_for(0);
    let changed = try_map_replicas(n, |r| {
        IntervalFragmentation::generate(&law, 0.0, t, 0, seed, r as u64)
            .and_then(|f| f.time_change(1.0))
            .and_then(|f| f.ranked_lengths(t))
            .map(|s| s.get(1))
    })?;
    let cfg = SimConfig::new(law.clone(), 1.0, t)
        .with_snapshots(vec![t])
        .with_seed(opts.seed_for(1));
    let direct: Vec<f64> = snapshot_values(&cfg, n, |s| s.get(1))?.into_iter().map(|v| v[0]).collect();
    let ks = ks_two_sample(&changed, &direct, 0.01)?;
    let mismatches: usize = try_map_replicas(50, |r| {
        IntervalFragmentation::generate(&law, 0.0, 3.0, 8, seed, r as u64)
            .and_then(|f| f.time_change(0.0).map(|g| usize::from(g != f)))
    })?
    .into_iter()
    .sum();
    Ok(vec![
        judge("AC12.largest_ks", ks.statistic, 0.0, None, Some(ks.p_value))?,
        judge("AC12.identity", mismatches as f64, 0.0, None, None)?,
    ])
}

pub(super) fn ac13(opts: &SuiteOptions) -> Rows {
    let alpha = -1.0;
    let horizon = 1e3;
    let law = DislocationLaw::uniform_binary();
    let n = opts.replicas(1000);
    let cfg = |eps: f64, seed: u64| {
        SimConfig::new(law.clone(), alpha, horizon)
            .with_threshold(eps)
            .with_seed(seed)
    };
    let times = |c: &SimConfig, n: usize| -> Result<Vec<Option<f64>>, SuiteError> {
        Ok(try_map_replicas(n, |r| extinction_time(c, r as u64).map(|o| o.time()))?)
    };
    let fine = times(&cfg(1e-4, opts.seed_for(0)), n)?;
    let coarse = times(&cfg(1e-3, opts.seed_for(0)), n)?;
    let extinct = |v: &[Option<f64>]| v.iter().filter(|x| x.is_some()).count() as f64;
    let mean = |v: &[Option<f64>]| Estimate::from_samples(&v.iter().flatten().copied().collect::<Vec<_>>()).value;
    let (mf, mc) = (mean(&fine), mean(&coarse));

    let eps = 1e-4;
    let collect = |seed: u64, n: usize| -> Result<Vec<f64>, SuiteError> {
        Ok(times(&cfg(eps, seed), n)?.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
    };
    let direct = collect(opts.seed_for(1), 2000)?;
    let pool = collect(opts.seed_for(2), 2000)?;
    let mut rng = RngStream::new(opts.seed_for(3), 0);
    let recomposed: Vec<f64> = (0..20_000)
        .map(|_| {
            let e: f64 = Exp1.sample(&mut rng);
            let xi = law.sample(&mut rng);
            let mut tail = 0.0f64;
            for &l in xi.log_sizes() {
                let z = pool[rng.random_range(0..pool.len())];
                if l > eps.ln() {
                    tail = tail.max((-alpha * l).exp() * z);
                }
            }
            e + tail
        })
        .collect();
    let d = ks_statistic(&direct, &recomposed)?;
    let (a, b) = (direct.len() as f64, recomposed.len() as f64);

    let logs: Vec<EventLog> = try_map_replicas(200, |r| run(&cfg(eps, opts.seed_for(0)), r as u64))?;
    let dust_gap = logs
        .iter()
        .filter(|l| l.extinction_time.is_some())
        .map(|l| (l.dust_at(horizon) - 1.0).abs())
        .fold(0.0, f64::max);
    let all_extinct = logs.iter().all(|l| l.extinction_time.is_some());
    Ok(vec![
        judge("AC13.extinct_1e-4", extinct(&fine), n as f64, None, None)?,
        judge("AC13.extinct_1e-3", extinct(&coarse), n as f64, None, None)?,
        judge("AC13.mean_time_stability", (mf - mc).abs() / mc, 0.0, None, None)?,
        judge("AC13.fixed_point_ks", d, 0.0, None, Some(ks_p_value(d, a * b / (a + b))))?,
        judge(
            "AC13.dust_after_extinction",
            if all_extinct { dust_gap } else { f64::INFINITY },
            0.0,
            None,
            None,
        )?,
    ])
}

pub(super) fn ac14(opts: &SuiteOptions) -> Rows {
    let wanted = 3000;
    let seed = opts.seed_for(0);
    let coalescents = try_map_replicas(opts.replicas(16_000), |r| {
        let mut rng = RngStream::new(seed, r as u64);
        build_cut_process(1.0, &mut rng).and_then(|c| reverse(&c, 8.0))
    })?;
    let holding: Vec<f64> = coalescents.iter().flat_map(|c| c.holding_times(3)).take(wanted).collect();
    let mut pairs = [0u64; 3];
    for e in coalescents
        .iter()
        .flat_map(|c| c.events.iter())
        .filter(|e| e.n_before == 3)
        .take(wanted)
    {
        pairs[match (e.rank_i, e.rank_j) {
            (1, 2) => 0,
            (1, 3) => 1,
            _ => 2,
        }] += 1;
    }
    let total = pairs.iter().sum::<u64>() as f64;
    let pair = chi2_test(&pairs, &[total / 3.0; 3], 0.01)?;

    let t = 0.7;
    let n = 5000;
    let cut_seed = opts.seed_for(1);
    let cuts: Vec<f64> = try_map_replicas(n, |r| {
        let mut rng = RngStream::new(cut_seed, r as u64);
        build_cut_process(t, &mut rng).map(|c| c.ranked_at(t).get(1))
    })?;
    let cfg = SimConfig::new(DislocationLaw::uniform_binary(), 1.0, t)
        .with_snapshots(vec![t])
        .with_seed(opts.seed_for(2));
    let chain: Vec<f64> = snapshot_values(&cfg, n, |s| s.get(1))?.into_iter().map(|v| v[0]).collect();
    let ks = ks_two_sample(&cuts, &chain, 0.01)?;
    let h = Estimate::from_samples(&holding);
    Ok(vec![
        judge("AC14.holding_n3", h.value, 1.0 / 3.0, Some(h.std_err), None)?,
        judge("AC14.pair_choice", pair.statistic, 0.0, None, Some(pair.p_value))?,
        judge("AC14.cuts_vs_chain", ks.statistic, 0.0, None, Some(ks.p_value))?,
    ])
}

fn histogram(values: &[usize]) -> Vec<u64> {
    let mut h = vec![0u64; values.iter().copied().max().unwrap_or(0) + 1];
    for &v in values {
        h[v] += 1;
    }
    h
}

pub(super) fn ac15(opts: &SuiteOptions) -> Rows {
    let law = DislocationLaw::uniform_binary();
    let t = 1.5;
    let n = opts.replicas(2000);
    let tree_seed = opts.seed_for(0);
    let from_trees = try_map_replicas(n, |r| {
        grow_until(&law, 0.0, t, tree_seed, r as u64).and_then(|tree| time_slice(&tree, t)).map(|s| s.len())
    })?;
    let cfg = SimConfig::new(law.clone(), 0.0, t)
        .with_snapshots(vec![t])
        .with_seed(opts.seed_for(1));
    let from_engine: Vec<usize> = snapshot_values(&cfg, n, |s| s.len() as f64)?
        .into_iter()
        .map(|v| v[0] as usize)
        .collect();
    let counts = chi2_homogeneity(&histogram(&from_trees), &histogram(&from_engine), 0.01)?;

    let det_cfg = SimConfig::new(law.clone(), 0.5, 2.0)
        .with_snapshots(vec![0.5, 1.0, 2.0])
        .with_seed(opts.seed_for(2))
        .with_replicas(20);
    let csv = |logs: &[EventLog]| {
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, logs).expect("writing to memory");
        buf
    };
    let first = csv(&run_replicas(&det_cfg)?);
    let second = csv(&run_replicas(&det_cfg)?);
    let sequential = csv(
        &map_replicas_sequential(det_cfg.replicas, |r| run(&det_cfg, r as u64)).into_iter().collect::<Result<Vec<_>, _>>()?,
    );
    let identical = first == second && first == sequential;

    let square = SizeFunctional::new(0.0, |s| s * s);
    let closed = generator_additive(&law, &MassPartition::unit(), &square, 0.0)?;
    let h = 0.01;
    let fd_cfg = SimConfig::new(law, 0.0, h)
        .with_snapshots(vec![h])
        .with_seed(opts.seed_for(3));
    let fd: Vec<f64> = snapshot_values(&fd_cfg, 200_000, |s| (s.power_sum(2.0) - 1.0) / h)?
        .into_iter()
        .map(|v| v[0])
        .collect();
    Ok(vec![
        judge("AC15.count_distribution", counts.statistic, 0.0, None, Some(counts.p_value))?,
        judge("AC15.determinism", if identical { 0.0 } else { 1.0 }, 0.0, None, None)?,
        judge("AC15.generator_closed", closed.value, -1.0 / 3.0, Some(closed.std_err), None)?,
        judge(
            "AC15.generator_difference",
            Estimate::from_samples(&fd).value,
            -1.0 / 3.0,
            None,
            None,
        )?,
    ])
}
