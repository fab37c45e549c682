use rdmfix::fixer::{fix_regular, fix_doci, FixConfig};
use rdmfix::pairing::{exact_doci_rdms, PairingModel};
use rdmfix::rdm::embed_to_spin;
use std::time::Instant;

fn main() {
    let m = PairingModel::picket_fence(12, 6, 1.0, -0.3).unwrap();
    let t = Instant::now();
    let exact = exact_doci_rdms(&m).unwrap();
    println!("exact rdms: {:?}", t.elapsed());
    let (_, rep) = fix_doci(&exact, &FixConfig::default()).unwrap();
    println!("doci: converged={} sweeps={} cost={:.3e}", rep.converged, rep.sweeps_used, rep.final_cost);
    let spin = embed_to_spin(&exact);
    let cfg = FixConfig { max_sweeps: 3, ..FixConfig::default() };
    let t = Instant::now();
    let (_, rep) = fix_regular(&spin, &cfg).unwrap();
    println!("regular: converged={} sweeps={} cost={:.3e} elapsed={:?}", rep.converged, rep.sweeps_used, rep.final_cost, t.elapsed());
    for r in &rep.records {
        println!("sweep {}: dF={:.3e}", r.sweep, r.frobenius_change);
        for c in &r.conditions {
            println!("  {}: trace_err={:?} min={:.3e}", c.name, c.trace_error, c.min_value);
        }
    }
}
