use std::fmt::Write as _;
use std::path::Path;
use std::process::ExitCode;

use formation_core::instance::{parse_instance, parse_special_list};
use formation_core::{tappa_solve, ConflictConfig, MotionMode, TappaResult};

pub fn run(
    file: &Path,
    mode: Option<&str>,
    special: Option<&str>,
    trace: bool,
) -> Result<ExitCode, String> {
    let text = std::fs::read_to_string(file).map_err(|e| format!("{}: {e}", file.display()))?;
    let mut pf = parse_instance(&text).map_err(|e| format!("{}: {e}", file.display()))?;

    let mode = match mode {
        Some(m) => MotionMode::parse(m).ok_or_else(|| format!("bad mode '{m}'"))?,
        None => pf.planner.mode(),
    };
    pf.planner.conflicts = match special {
        Some(list) => {
            let types = parse_special_list(list)
                .ok_or_else(|| format!("bad special conflict list '{list}'"))?;
            ConflictConfig::with_special(mode, &types).expect("validated")
        }
        None if mode != pf.planner.mode() => ConflictConfig::for_mode(mode),
        None => pf.planner.conflicts,
    };
    pf.planner.trace = trace;

    match tappa_solve(&pf.instance, &pf.planner) {
        Ok(res) => {
            print!("{}", report(&res, &pf.planner.conflicts, trace));
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => Err(format!("planning failed: {e}")),
    }
}

fn report(res: &TappaResult, conflicts: &ConflictConfig, trace: bool) -> String {
    let mut out = String::new();
    let special = conflicts.special_types();
    let special = if special.is_empty() {
        "none".to_string()
    } else {
        special
            .iter()
            .map(u8::to_string)
            .collect::<Vec<_>>()
            .join(",")
    };
    let _ = writeln!(
        out,
        "mode {:?}, special conflicts {special}",
        conflicts.mode
    );
    let _ = writeln!(out, "assignment log");
    let _ = writeln!(out, "  #\tassignment\tcost\tpath cost");
    for (i, e) in res.log.iter().enumerate() {
        let path = e
            .path_cost
            .map_or("unsolved".to_string(), |c| c.to_string());
        let _ = writeln!(
            out,
            "  {}\t{:?}\t{}\t{path}",
            i + 1,
            e.assignment,
            e.assignment_cost
        );
    }
    if let Some(t) = res.termination_cost {
        let _ = writeln!(out, "terminated by assignment cost {t}");
    }
    let _ = writeln!(out, "best assignment {:?}", res.best_assignment.one_based());
    let _ = writeln!(out, "relative path map");
    out.push_str(&res.best_path_set.map().render());
    if trace {
        let sol = &res.best_solution;
        let _ = writeln!(
            out,
            "constraint tree ({} generated, {} expanded)",
            sol.nodes_generated, sol.nodes_expanded
        );
        for n in &sol.trace {
            let parent = n.parent.map_or("-".to_string(), |p| format!("N{}", p + 1));
            let added = n.added.as_deref().unwrap_or("-");
            let conflicts = if n.conflicts.is_empty() {
                "none".to_string()
            } else {
                n.conflicts.join("; ")
            };
            let mark = if n.expanded { "*" } else { " " };
            let _ = writeln!(
                out,
                "{mark}N{}\tparent {parent}\tcost {}\tadded {added}\tconflicts {conflicts}",
                n.id + 1,
                n.cost
            );
        }
    }
    let _ = writeln!(out, "best cost {}", res.best_cost);
    out
}
