mod common;

use common::invariants;

macro_rules! suite {
    ($name:ident) => {
        #[test]
        fn $name() {
            let (_, run, cases) = invariants::all()
                .into_iter()
                .find(|(n, _, _)| *n == stringify!($name))
                .unwrap();
            if let Err(e) = run(cases) {
                panic!("{e}");
            }
        }
    };
}

suite!(resolvent_identity);
suite!(op_norm_submultiplicative);
suite!(semigroup_property);
suite!(phi_singularity_bound);
suite!(picard_contraction);
suite!(resolvent_ratio_bound);
suite!(interpolated_ratio_bound);
suite!(smoothing_bound);
suite!(process_growth_bounds);
suite!(solution_growth_bound);
