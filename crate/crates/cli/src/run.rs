//! `fluxkit run`: one cleanbot session on a scenario file.

use std::fmt::Write;

use fluxkit::cleanbot::{self, GroundTruth, Scenario, Summary};
use fluxkit::Result;

/// Text printed by a run, and the summary it ends with.
pub struct RunOutput {
    pub text: String,
    pub summary: Summary,
}

/// Run the exploration strategy on `sc`. With `trace`, every executed
/// action and every main-loop pass is listed before the summary.
pub fn run_scenario(sc: &Scenario, trace: bool) -> Result<RunOutput> {
    sc.validate()?;
    let mut agent = cleanbot::new_agent(sc)?;
    let mut gt = GroundTruth::new(sc);
    let mut steps = String::new();
    let mut n = 0;
    let report = cleanbot::run_strategy(&mut agent, &mut gt, sc, cleanbot::budget(sc), &mut |_, g, a, y| {
        n += 1;
        if trace {
            let _ = writeln!(steps, "{}", cleanbot::trace_line(n, a, y, g));
        }
        Ok(())
    })?;
    let summary = cleanbot::summarize(&mut agent, &gt, sc)?;
    let mut text = String::new();
    if trace {
        text.push_str(&steps);
        for row in &report.rows {
            let _ = writeln!(text, "LOOP {row}");
        }
    }
    let _ = writeln!(text, "{summary}");
    Ok(RunOutput { text, summary })
}
