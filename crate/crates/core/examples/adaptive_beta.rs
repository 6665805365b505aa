use codesign::online::{BetaController, BetaMode, BetaSettings};

// Cloning weight driven by episode returns. It shrinks while returns sit
// below the target, and a drop from one episode to the next pushes it back up.
fn main() -> codesign::Result<()> {
    let target = 1000.0;
    let returns = [150.0, 120.0, 260.0, 410.0, 380.0, 620.0, 800.0, 950.0, 1040.0, 1100.0];

    for mode in [BetaMode::Adaptive, BetaMode::Fixed] {
        let settings = BetaSettings { mode, ..BetaSettings::default() };
        let mut ctl = BetaController::new(settings, target)?;
        print!("{mode:?}:");
        for r in returns {
            ctl.observe_return(r);
            print!(" {:.3}", ctl.beta());
        }
        println!();
    }
    Ok(())
}
