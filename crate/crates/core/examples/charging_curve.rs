//! Prints the discretised charging function for a few starting SoC levels.

use evsp::charging::{ChargerProfile, ChargingFunction, ChargingTable};

fn main() -> evsp::Result<()> {
    let f = ChargingFunction::new(ChargerProfile::default(), 300.0, 100)?;
    let table = ChargingTable::new(&f, 15, 6);
    println!("start  15min  30min  45min  60min  75min  90min");
    for start in (0..=90).step_by(10) {
        let row: Vec<String> = (1..=6).map(|m| format!("{:>5}", table.apply(start, m))).collect();
        println!("{start:>5}  {}", row.join("  "));
    }
    println!("exact 0% + 45 min = {:.3}%", f.charge_exact(0.0, 45.0));
    Ok(())
}
