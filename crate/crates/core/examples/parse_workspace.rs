//! Parse a workspace and show what the validator reports for a broken one.

use histbayes::workspace::{parse_workspace, ParamKind};
use histbayes::Error;

fn main() -> histbayes::Result<()> {
    let (spec, obs) = parse_workspace(include_str!("data/three_bin.json"))?;
    for (c, channel) in spec.channels.iter().enumerate() {
        println!("channel {} ({} bins), observed {:?}", channel.name, channel.n_bins, obs.main[c]);
        for s in &channel.samples {
            let mods: Vec<_> = s.modifiers.iter().map(|m| format!("{}:{}", m.kind.type_name(), m.parameter)).collect();
            println!("  {:<10} {:?} [{}]", s.name, s.nominal, mods.join(", "));
        }
    }
    for p in &spec.parameters {
        let role = if p.kind == ParamKind::Free { "free" } else { "constrained" };
        println!("parameter {} ({role})", p.name);
    }

    let broken = include_str!("data/three_bin.json").replace("[57, 54, 72]", "[57, 54]");
    match parse_workspace(&broken) {
        Err(Error::Validation(findings)) => {
            for f in findings {
                println!("finding: {f}");
            }
        }
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
