//! Image-source IRs from each seat to the four cabin microphones.

use cabinsep::irlab::{simulate_ism_all, RoomSpec};

fn main() -> cabinsep::Result<()> {
    for zone in 0..4 {
        let irs = simulate_ism_all(&RoomSpec::cabin_seat(zone)?)?;
        let line: Vec<String> = irs
            .iter()
            .map(|h| {
                let peak = h
                    .taps()
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                    .unwrap()
                    .0;
                format!("peak@{peak:>3} E={:.3}", h.energy())
            })
            .collect();
        println!("seat {zone}: {}", line.join("  "));
    }
    Ok(())
}
