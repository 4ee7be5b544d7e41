fn main() {
    for g in [0.0, 0.5, 5.0] {
        let s = bec_oracles::shooting::harmonic_gp_ground_state(g);
        println!("g={g} E={:.12} mu={:.12} kin={:.12} trap={:.12} int={:.12}", s.energy, s.mu, s.kinetic, s.trap, s.interaction);
    }
}
