use mpcc_core::alm::{solve_alm, AlmConfig, AlmStatus};
use mpcc_core::generate::{tiny_problem, TinyShape};
use mpcc_core::nsnewton::{solve_newton, FullPoint, NewtonConfig, NewtonStatus};
use mpcc_core::oracle::enumerate_branch_nlps;
use mpcc_core::pgrad::PgradConfig;
use mpcc_core::stationarity::classify_stationarity;
use mpcc_core::MultiplierSet;
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const MATCH_TOL: f64 = 1e-6;

fn tight_alm() -> AlmConfig {
    AlmConfig {
        eps_scale: 1e-10,
        tau_alm: 1e-10,
        ..Default::default()
    }
}

#[test]
fn solver_outputs_are_branch_kkt_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut alm_ok, mut newton_ok) = (0, 0);
    for case in 0..100 {
        let shape = TinyShape::sample(&mut rng);
        let p = tiny_problem(&mut rng, shape).unwrap();
        let points = enumerate_branch_nlps(&p).unwrap();
        assert!(!points.is_empty(), "case {case}: feasible problem without branch points");
        let x0 = DVector::from_fn(p.n(), |_, _| StandardNormal.sample(&mut rng));
        let m0 = MultiplierSet::zeros(&p);

        let near = |x: &DVector<f64>| points.iter().map(|b| (&b.x - x).amax()).fold(f64::INFINITY, f64::min);

        let alm = solve_alm(&p, &tight_alm(), &x0, &m0, &PgradConfig::default()).unwrap();
        if alm.status == AlmStatus::Converged {
            alm_ok += 1;
            let d = near(&alm.x);
            assert!(d <= MATCH_TOL, "case {case} {shape:?}: ALM point {d:e} from every branch point");
            let rep = classify_stationarity(&p, &alm.x, &alm.multipliers, 1e-6).unwrap();
            assert!(rep.is_m, "case {case} {shape:?}: ALM point not M-stationary {rep:?}");
        }

        let nsn = solve_newton(&p, &NewtonConfig::default(), &FullPoint::new(x0, m0)).unwrap();
        if nsn.status == NewtonStatus::Converged {
            newton_ok += 1;
            let d = near(&nsn.z.x);
            assert!(d <= MATCH_TOL, "case {case} {shape:?}: Newton point {d:e} from every branch point");
            let rep = classify_stationarity(&p, &nsn.z.x, &nsn.z.multipliers, 1e-6).unwrap();
            assert!(rep.is_m, "case {case} {shape:?}: Newton point not M-stationary {rep:?}");
        }
    }
    println!("converged: alm {alm_ok}/100, newton {newton_ok}/100");
    assert!(alm_ok >= 90 && newton_ok >= 50, "alm {alm_ok}, newton {newton_ok}");
}
