use ctcm::simulator::{JumpProcess, MarkovProcess, SemiMarkovProcess};
use ctcm::stats::{chi_square_gof, kolmogorov_sf};
use ctcm::validate::DEFAULT_SEED;
use ctcm::{substream, ModelParams, PerturbationDistribution, SemiMarkovConfig, State, Trajectory};

fn params(theta_a: f64, theta_d: f64, n: usize) -> ModelParams {
    let eta = PerturbationDistribution::uniform_box(vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
    ModelParams::new(theta_a, theta_d, n, eta).unwrap()
}

/// One-sample KS p-value against the exponential law with `rate`.
fn ks_exponential(mut xs: Vec<f64>, rate: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = -(-rate * x).exp_m1();
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let en = n.sqrt();
    kolmogorov_sf((en + 0.12 + 0.11 / en) * d)
}

#[test]
fn jump_counts_stay_under_uniformization_bound() {
    let p = params(0.05, 0.2, 6);
    let theta = p.theta_bound();
    let horizon = 3600.0;
    let limit = theta * horizon + 6.0 * (theta * horizon).sqrt();
    for run in 0..1000u64 {
        let initial = State::all_attached(6, &[0.0, 0.0]).unwrap();
        let mut m = MarkovProcess::new(&p, initial, substream(DEFAULT_SEED, run)).unwrap();
        while m.next_time() <= horizon {
            m.step();
        }
        assert!((m.jumps() as f64) < limit, "run {run}: {} jumps ≥ {limit}", m.jumps());
    }
}

/// Per level, the observed up-moves against the kernel's up probability,
/// pooled into one χ² with a degree of freedom per informative level.
fn projected_chain_pvalue(traj: &Trajectory, p: &ModelParams) -> f64 {
    let n = p.n();
    let mut moves = vec![[0u64; 2]; n + 1];
    for w in traj.states().windows(2) {
        let (a, b) = (w[0].attached_count(), w[1].attached_count());
        assert_eq!(a.abs_diff(b), 1);
        moves[a][usize::from(b > a)] += 1;
    }
    let (mut stat, mut dof) = (0.0, 0.0);
    for (k, m) in moves.iter().enumerate() {
        let (down, up) = p.count_transition(k);
        if down == 0.0 || up == 0.0 || m[0] + m[1] < 20 {
            continue;
        }
        let t = chi_square_gof(&m[..], &[down, up], 5.0);
        stat += t.statistic;
        dof += t.dof;
    }
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

#[test]
fn markov_projected_chain_follows_kernel() {
    let p = params(0.05, 0.2, 8);
    let initial = State::all_attached(8, &[0.0, 0.0]).unwrap();
    let mut m = MarkovProcess::new(&p, initial, substream(DEFAULT_SEED, 0)).unwrap();
    let traj = Trajectory::record_jumps(&mut m, 100_000);
    let pv = projected_chain_pvalue(&traj, &p);
    assert!(pv > 0.01, "p = {pv}");
}

#[test]
fn exponential_semi_markov_projected_chain_follows_kernel() {
    let p = params(0.05, 0.2, 8);
    let waits = SemiMarkovConfig::exponential(&p).unwrap();
    let initial = State::all_attached(8, &[0.0, 0.0]).unwrap();
    let mut s = SemiMarkovProcess::new(&p, &waits, initial, substream(DEFAULT_SEED, 1)).unwrap();
    let traj = Trajectory::record_jumps(&mut s, 100_000);
    let pv = projected_chain_pvalue(&traj, &p);
    assert!(pv > 0.01, "p = {pv}");
}

#[test]
fn holding_times_follow_exact_rate_per_level() {
    // conditional on the level, holding times are i.i.d. Exp(rate(level))
    let p = params(0.05, 0.2, 5);
    let waits = SemiMarkovConfig::exponential(&p).unwrap();
    let initial = State::all_attached(5, &[0.0, 0.0]).unwrap();
    let mut m = MarkovProcess::new(&p, initial.clone(), substream(DEFAULT_SEED, 2)).unwrap();
    let mut s = SemiMarkovProcess::new(&p, &waits, initial, substream(DEFAULT_SEED, 3)).unwrap();
    for traj in [Trajectory::record_jumps(&mut m, 200_000), Trajectory::record_jumps(&mut s, 200_000)] {
        let mut by_level = vec![Vec::new(); 6];
        for (state, h) in traj.states().iter().zip(traj.holding_times()) {
            by_level[state.attached_count()].push(h);
        }
        for (k, hs) in by_level.into_iter().enumerate().filter(|(_, hs)| hs.len() > 1000) {
            let pv = ks_exponential(hs, p.rate_for_count(k));
            assert!(pv > 0.001, "level {k}: p = {pv}");
        }
    }
}

#[test]
fn different_seeds_give_different_paths() {
    let p = params(0.05, 0.05, 4);
    let initial = State::all_attached(4, &[0.0, 0.0]).unwrap();
    let a = ctcm::simulate_markov(&p, initial.clone(), 600.0, ctcm::make_rng(1)).unwrap();
    let b = ctcm::simulate_markov(&p, initial.clone(), 600.0, ctcm::make_rng(2)).unwrap();
    let again = ctcm::simulate_markov(&p, initial, 600.0, ctcm::make_rng(1)).unwrap();
    assert_ne!(a, b);
    assert_eq!(a, again);
}
