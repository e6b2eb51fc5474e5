//! Plain-text rendering. Numbers are shown to six significant digits.

use macsel_core::cpf::{EvaluationReport, Outcome};
use macsel_core::desim::{DivergenceReport, SimStats};
use macsel_core::registry::{Registry, SelectionResult};

/// `x` with six significant digits, trailing zeros trimmed, switching to
/// exponent notation outside [1e-5, 1e6).
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // rounding can carry into a new digit (999999.5 -> 1000000)
        if s.trim_start_matches('-').split('.').next().map_or(0, str::len) > 6 {
            return exponent(x);
        }
        trim(&s)
    } else {
        exponent(x)
    }
}

fn exponent(x: f64) -> String {
    let s = format!("{x:.5e}");
    match s.split_once('e') {
        Some((m, e)) => format!("{}e{e}", trim(m)),
        None => s,
    }
}

fn trim(s: &str) -> String {
    if s.contains('.') && !s.contains('e') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (i, c) in r.iter().enumerate() {
            if i < widths.len() {
                widths[i] = widths[i].max(c.len());
            }
        }
    }
    let line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{:<w$}", c, w = widths.get(i).copied().unwrap_or(0)))
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

pub fn evaluation(report: &EvaluationReport) -> String {
    let header = [
        "category",
        "collision",
        "overhearing",
        "idle",
        "overhead",
        "energy_W",
        "delay_s",
        "cpf",
    ];
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for e in &report.evaluations {
        match &e.outcome {
            Outcome::Ok {
                energy,
                delay,
                cpf,
                collision_probability,
                warnings,
            } => {
                rows.push(vec![
                    e.category.to_string(),
                    sig6(energy.collision),
                    sig6(energy.overhearing),
                    sig6(energy.idle_listening),
                    sig6(energy.overhead),
                    sig6(energy.total),
                    sig6(delay.seconds),
                    sig6(*cpf),
                ]);
                if let Some(p) = collision_probability {
                    notes.push(format!("{}: collision probability {}", e.category, sig6(*p)));
                }
                for w in warnings {
                    notes.push(format!("{}: warning: {w}", e.category));
                }
            }
            Outcome::Error { reason } => {
                let mut r = vec![e.category.to_string()];
                r.extend(std::iter::repeat_n("-".to_string(), 7));
                rows.push(r);
                notes.push(format!("{}: error: {reason}", e.category));
            }
        }
    }
    let mut out = table(&header, &rows);
    for n in notes {
        out.push_str(&n);
        out.push('\n');
    }
    match &report.ranking.best {
        Some(b) => out.push_str(&format!("best: {b}\n")),
        None => out.push_str("best: none (no category could be evaluated)\n"),
    }
    if !report.ranking.tied.is_empty() {
        let t: Vec<String> = report.ranking.tied.iter().map(|c| c.to_string()).collect();
        out.push_str(&format!("tied: {}\n", t.join(", ")));
    }
    out
}

pub fn selection(sel: &SelectionResult, requirements: &[String]) -> String {
    let mut out = String::new();
    let req = if requirements.is_empty() {
        "(none)".to_string()
    } else {
        requirements.join(", ")
    };
    out.push_str(&format!("requirements: {req}\n"));
    out.push_str("feasible categories, best first:\n");
    for (i, c) in sel.feasible_categories.iter().enumerate() {
        let cpf = sel
            .evaluations
            .iter()
            .find(|e| &e.category == c)
            .and_then(|e| e.cpf())
            .map_or("-".into(), sig6);
        out.push_str(&format!("  {}. {c}  cpf {cpf}\n", i + 1));
    }
    for w in &sel.warnings {
        out.push_str(&format!("warning: {w}\n"));
    }
    if !sel.tied.is_empty() {
        let t: Vec<String> = sel.tied.iter().map(|c| c.to_string()).collect();
        out.push_str(&format!("tied: {}\n", t.join(", ")));
    }
    out.push_str(&format!("selected category: {}\n", sel.best_category));
    out.push_str(&format!("protocols: {}\n", sel.protocols.join(", ")));
    out
}

pub fn sim_stats(s: &SimStats) -> String {
    let mut out = String::new();
    out.push_str(&format!("protocol: {} (rng {}, seed {})\n", s.protocol, s.rng, s.seed));
    out.push_str(&format!(
        "replications: {}{}\n",
        s.replications,
        if s.converged { "" } else { " (stopping rule NOT met)" }
    ));
    let e = &s.energy_per_second;
    out.push_str(&format!("energy: {} W +/- {}\n", sig6(e.mean), sig6(e.half_width)));
    let t = &s.tallies;
    out.push_str(&format!(
        "  collision {}  overhearing {}  idle {}  overhead {}\n",
        sig6(t.collision),
        sig6(t.overhearing),
        sig6(t.idle),
        sig6(t.overhead)
    ));
    out.push_str(&format!("  payload (outside total) {}\n", sig6(s.payload_power)));
    match &s.delay {
        Some(d) => out.push_str(&format!("delay: {} s +/- {}\n", sig6(d.mean), sig6(d.half_width))),
        None => out.push_str("delay: - (nothing delivered)\n"),
    }
    out.push_str(&format!(
        "packets: generated {}  delivered {}  dropped {}  in flight {}\n",
        s.packets_generated, s.packets_delivered, s.packets_dropped, s.packets_in_flight
    ));
    out.push_str(&format!("failed attempts: {}\n", s.collisions));
    out.push_str(&format!("mean degree: {}\n", sig6(s.mean_degree)));
    out
}

pub fn divergence(r: &DivergenceReport, tolerance: f64) -> String {
    let header = ["pkt_rate", "model_W", "sim_W", "half_width", "model_delay_s", "sim_delay_s", "divergence"];
    let rows: Vec<Vec<String>> = r
        .points
        .iter()
        .map(|p| {
            vec![
                sig6(p.pkt_rate),
                sig6(p.model_energy),
                sig6(p.sim_energy),
                sig6(p.sim_energy_half_width),
                sig6(p.model_delay),
                p.sim_delay.map_or("-".into(), sig6),
                sig6(p.divergence),
            ]
        })
        .collect();
    let metric = match r.metric {
        macsel_core::desim::compare::Metric::Energy => "energy",
        macsel_core::desim::compare::Metric::Delay => "delay",
    };
    let mut out = format!(
        "protocol: {}  compared: {metric}  model radius: {} m\n",
        r.protocol,
        sig6(r.model_radius)
    );
    out.push_str(&table(&header, &rows));
    out.push_str(&format!(
        "max divergence: {} (tolerance {}) {}\n",
        sig6(r.max_divergence),
        sig6(tolerance),
        if r.max_divergence <= tolerance { "ok" } else { "EXCEEDED" }
    ));
    out
}

pub fn registry(reg: &Registry) -> String {
    let mut out = String::new();
    if let Some(n) = &reg.note {
        out.push_str(&format!("note: {n}\n"));
    }
    out.push_str("categories:\n");
    for c in &reg.categories {
        out.push_str(&format!("  {}  representative {}", c.id, c.representative));
        if !c.note.is_empty() {
            out.push_str(&format!("  ({})", c.note));
        }
        out.push('\n');
    }
    out.push_str("requirements:\n");
    for r in &reg.requirements {
        out.push_str(&format!("  {}", r.id));
        if !r.description.is_empty() {
            out.push_str(&format!("  ({})", r.description));
        }
        out.push('\n');
    }
    out.push_str("protocols:\n");
    let rows: Vec<Vec<String>> = reg
        .protocols
        .iter()
        .map(|p| {
            vec![
                format!("  {}", p.name),
                p.category.to_string(),
                p.satisfies.iter().cloned().collect::<Vec<_>>().join(","),
                p.reviewed_against.iter().cloned().collect::<Vec<_>>().join(","),
            ]
        })
        .collect();
    out.push_str(&table(&["  name", "category", "satisfies", "reviewed"], &rows));
    out
}

#[cfg(test)]
mod tests {
    use super::sig6;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(0.314), "0.314");
        assert_eq!(sig6(1.0 / 3.0), "0.333333");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(999999.7), "1e6");
        assert_eq!(sig6(2.5e-7), "2.5e-7");
        assert_eq!(sig6(-0.0123456789), "-0.0123457");
        assert_eq!(sig6(12.0), "12");
    }
}
