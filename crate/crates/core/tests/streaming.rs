use std::time::Instant;

use tensor_rls::factor::direct_trls;
use tensor_rls::problems::gen_example1;
use tensor_rls::rng::{randn_tensor, NormalRng};
use tensor_rls::solvers::{tgkt_solve, GktOptions, Session, SubSolver, UpdateSample};
use tensor_rls::tensor::rel_error;

#[test]
fn five_updates_beat_one_rebuild() {
    let (m, c, k) = (30, 100, 7);
    let inst = gen_example1(m, c, 42).unwrap();
    let problem = inst.problem();
    let x = direct_trls(&problem.a, &problem.b, problem.lambda).unwrap();
    let mut rng = NormalRng::new(43);
    let samples: Vec<UpdateSample> = (0..5)
        .map(|_| UpdateSample::new(randn_tensor(m, 1, m, &mut rng), randn_tensor(c, 1, m, &mut rng)))
        .collect();
    let opts = GktOptions::new(k);

    let mut session = Session::new(problem, x).unwrap();
    let start = Instant::now();
    for s in &samples {
        session.absorb(s, SubSolver::Gkt(opts)).unwrap();
    }
    let streamed = start.elapsed();

    let grown = session.problem().clone();
    assert_eq!(grown.a.n1(), m + 5);
    let start = Instant::now();
    let rebuilt = tgkt_solve(&grown, opts).unwrap();
    let rebuild = start.elapsed();

    assert!(streamed < rebuild, "5 updates {streamed:?} vs rebuild {rebuild:?}");
    let exact = direct_trls(&grown.a, &grown.b, grown.lambda).unwrap();
    assert!(rel_error(session.solution(), &exact).unwrap() < 1e-3);
    assert!(rel_error(&rebuilt, &exact).unwrap() < 1e-3);
}
