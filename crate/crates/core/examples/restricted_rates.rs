//! Monte Carlo restricted rates P_LS and P_BP, and sampled rho values.

use bp_invlab::rate_lab::{estimate_restricted_rates, monte_carlo_rho, warmup_rates, SparseCone};
use bp_invlab::transforms::gaussian_sensing;
use bp_invlab::{FidelityKind, SeededRng};

fn main() -> bp_invlab::Result<()> {
    let supports = SeededRng::new(0, 4);
    for m in [64, 128, 192] {
        let op = gaussian_sensing(m, 256, &SeededRng::new(0, 1))?;
        let est = estimate_restricted_rates(&op, 10, 500, &supports)?;
        let (ls_warm, _) = warmup_rates(&op);
        println!(
            "m = {m:>3}: P_LS ~ {:.4}, P_BP ~ {:.4}, ratio {:.4}; oracle-prior LS rate {ls_warm:.4}",
            est.p_ls_hat, est.p_bp_hat, est.ratio
        );
    }
    let op = gaussian_sensing(128, 256, &SeededRng::new(0, 1))?;
    for kind in FidelityKind::BOTH {
        let rho = monte_carlo_rho(&op, kind, &SparseCone::new(10), 2000, &SeededRng::new(0, 5))?;
        println!("{kind}: sampled rho over 10-sparse pairs {rho:.4}");
    }
    Ok(())
}
