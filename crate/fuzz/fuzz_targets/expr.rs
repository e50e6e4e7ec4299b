#![no_main]

use evoproc::expr::{Env, Expr, Var};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(e) = Expr::parse(src) {
        let env = Env {
            t: 0.5,
            x: 0.25,
            s: -1.0,
            eps: 0.1,
        };
        let v = e.eval(&env);
        assert_eq!(v.to_bits(), e.eval(&env).to_bits());
        let _ = e.uses(Var::S);
    }
});
