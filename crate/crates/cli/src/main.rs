use std::fmt::Write as _;
use std::fs;
use std::io::{self, Read, Write as _};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use fwportion::baseline::{generate_baseline, parse_framework_xml, validate_topology};
use fwportion::loganalyzer::{extract_significant, parse_log, replay_with, traffic_stats, DirectionMode, LogRecord};
use fwportion::model::{detect_format, parse_packet, read_policy, serialize_policy, Action, Direction, Policy};
use fwportion::portions::{partition, portion_stats, verify_partition};
use fwportion::relations::{detect_anomalies_in, RelationClass, FIELD_NAMES};
use fwportion::update::update_policy;

#[derive(Parser)]
#[command(name = "fwportion", version, about = "Portion-wise firewall policy analysis")]
struct Cli {
    /// Default action for CSV policies without a `#!` header line
    #[arg(long, global = true, default_value = "DENY", value_parser = parse_action)]
    default: Action,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a policy into portions and print them with summary counts
    Partition {
        policy: String,
        #[arg(long)]
        csv: bool,
    },
    /// Report inactive, shadowed and redundant rules and overlapping rule pairs
    Relations {
        policy: String,
        #[arg(long)]
        csv: bool,
    },
    /// Put the rules of NEW in front of OLD, dropping duplicated old rules
    Update {
        old: String,
        new: String,
        /// Where to write the updated policy (stdout when omitted)
        #[arg(short, long)]
        output: Option<String>,
        #[arg(long)]
        csv: bool,
    },
    /// Decide one packet, e.g. "TCP INPUT 10.0.0.3:139 121.10.5.3:49621"
    Match {
        policy: String,
        packet: String,
        #[arg(long)]
        csv: bool,
    },
    /// Traffic statistics and significant fields of a firewall log
    Logstats {
        log: String,
        #[arg(long)]
        csv: bool,
    },
    /// Re-decide every logged packet and report verdicts the policy disagrees with
    Replay {
        log: String,
        policy: String,
        #[arg(long, value_enum, default_value_t = DirectionArg::Infer)]
        direction: DirectionArg,
        #[arg(long)]
        csv: bool,
    },
    /// Generate the baseline blocking policy from a framework description
    Baseline {
        config: String,
        #[arg(short, long)]
        output: Option<String>,
    },
    /// Check the framework topology for links that bypass the firewalls
    Topology { config: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Infer,
    Input,
    Output,
}

impl From<DirectionArg> for DirectionMode {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Infer => DirectionMode::Infer,
            DirectionArg::Input => DirectionMode::Fixed(Direction::Input),
            DirectionArg::Output => DirectionMode::Fixed(Direction::Output),
        }
    }
}

fn parse_action(s: &str) -> Result<Action, String> {
    s.parse().map_err(|e: fwportion::Error| e.to_string())
}

/// Outcome of a command that ran to completion.
enum Status {
    Clean,
    Findings,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Clean) => ExitCode::SUCCESS,
        Ok(Status::Findings) => ExitCode::from(1),
        Err(e) => {
            eprintln!("fwportion: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<Status> {
    let default = cli.default;
    match cli.command {
        Command::Partition { policy, csv } => cmd_partition(&load_policy(&policy, default)?, csv),
        Command::Relations { policy, csv } => cmd_relations(&load_policy(&policy, default)?, csv),
        Command::Update { old, new, output, csv } => {
            let old_text = read_input(&old)?;
            let format = detect_format(&old_text);
            let old = read_policy(&old_text, default).with_context(|| old.clone())?;
            let new = load_policy(&new, default)?;
            cmd_update(&old, &new, output.as_deref(), csv, format)
        }
        Command::Match { policy, packet, csv } => cmd_match(&load_policy(&policy, default)?, &packet, csv),
        Command::Logstats { log, csv } => cmd_logstats(&log, csv),
        Command::Replay { log, policy, direction, csv } => {
            let policy = load_policy(&policy, default)?;
            cmd_replay(&log, &policy, direction.into(), csv)
        }
        Command::Baseline { config, output } => cmd_baseline(&config, output.as_deref()),
        Command::Topology { config } => cmd_topology(&config),
    }
}

fn read_input(path: &str) -> Result<String> {
    if path == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).context("reading stdin")?;
        return Ok(s);
    }
    fs::read_to_string(path).with_context(|| format!("reading {path}"))
}

fn load_policy(path: &str, default: Action) -> Result<Policy> {
    let text = read_input(path)?;
    read_policy(&text, default).with_context(|| path.to_string())
}

fn write_output(path: Option<&str>, text: &str) -> Result<()> {
    match path {
        Some(p) if p != "-" => fs::write(p, text).with_context(|| format!("writing {p}")),
        _ => io::stdout().write_all(text.as_bytes()).context("writing stdout"),
    }
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn join(ids: &[usize], sep: &str) -> String {
    ids.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(sep)
}

fn rule_label(rule: Option<usize>) -> String {
    rule.map_or_else(|| "default".to_string(), |r| r.to_string())
}

fn cmd_partition(policy: &Policy, csv: bool) -> Result<Status> {
    let plist = partition(policy);
    let stats = portion_stats(&plist);
    let report = verify_partition(&plist);
    let mut out = String::new();
    let stat_rows = vec![
        ("rule_count".to_string(), stats.rule_count.to_string()),
        ("portion_count".to_string(), stats.portion_count.to_string()),
        ("default_portions".to_string(), stats.default_portion_count.to_string()),
    ];
    if csv {
        out += &csv_table(
            &["portion", "action", "rule", "r_in", "r_out", "r_eff", "space"],
            plist.portions().iter().enumerate().map(|(i, p)| {
                vec![
                    (i + 1).to_string(),
                    p.action.to_string(),
                    rule_label(p.effective_rule()),
                    join(&p.r_in, ";"),
                    join(&p.r_out, ";"),
                    join(&p.r_eff, ";"),
                    p.describe(),
                ]
            }),
        )?;
        out.push('\n');
        let per_rule = stats.portions_per_rule.iter().map(|(r, n)| (format!("portions_rule_{r}"), n.to_string()));
        out += &csv_table(&["stat", "value"], stat_rows.into_iter().chain(per_rule).map(|(k, v)| vec![k, v]))?;
    } else {
        for (i, p) in plist.portions().iter().enumerate() {
            let by = match p.effective_rule() {
                Some(r) => format!("rule {r}"),
                None => "default".to_string(),
            };
            writeln!(out, "portion {}: {} by {by}", i + 1, p.action)?;
            writeln!(out, "  r_in:  [{}]", join(&p.r_in, ", "))?;
            writeln!(out, "  r_out: [{}]", join(&p.r_out, ", "))?;
            writeln!(out, "  space: {}", p.describe())?;
        }
        writeln!(out)?;
        for (k, v) in &stat_rows {
            writeln!(out, "{k:<17} {v}")?;
        }
        let per_rule: Vec<String> = stats.portions_per_rule.iter().map(|(r, n)| format!("{r}:{n}")).collect();
        writeln!(out, "{:<17} {}", "portions_per_rule", per_rule.join(" "))?;
    }
    print!("{out}");
    for v in &report.violations {
        eprintln!("fwportion: partition check failed: {v}");
    }
    Ok(if report.passed() { Status::Clean } else { Status::Findings })
}

fn cmd_relations(policy: &Policy, csv: bool) -> Result<Status> {
    let plist = partition(policy);
    let report = detect_anomalies_in(&plist);
    let overlapping: Vec<_> = report
        .relations
        .iter()
        .filter(|f| f.relation.class != RelationClass::CompletelyDisjoint)
        .collect();
    let mut out = String::new();
    if csv {
        out += &csv_table(
            &["rule", "anomaly", "witnesses"],
            report.rows().into_iter().map(|(r, kind, w)| vec![r.to_string(), kind.as_str().to_string(), join(w, ";")]),
        )?;
        out.push('\n');
        let mut header = vec!["first", "second", "class"];
        header.extend(FIELD_NAMES);
        out += &csv_table(
            &header,
            overlapping.iter().map(|f| {
                let mut row = vec![f.first.to_string(), f.second.to_string(), f.relation.class.as_str().to_string()];
                row.extend(f.relation.fields.iter().map(|r| r.as_str().to_string()));
                row
            }),
        )?;
    } else {
        writeln!(out, "anomalies:")?;
        if report.rows().is_empty() {
            writeln!(out, "  none")?;
        }
        for (r, kind, w) in report.rows() {
            let witnesses = if w.is_empty() { "default".to_string() } else { join(w, ", ") };
            writeln!(out, "  rule {r:<4} {:<10} witnesses: {witnesses}", kind.as_str())?;
        }
        writeln!(out, "overlapping pairs:")?;
        if overlapping.is_empty() {
            writeln!(out, "  none")?;
        }
        for f in &overlapping {
            writeln!(
                out,
                "  {:>3} {:>3}  {:<19} {}",
                f.first,
                f.second,
                f.relation.class.as_str(),
                f.relation.describe_fields()
            )?;
        }
    }
    print!("{out}");
    Ok(if report.has_anomalies() { Status::Findings } else { Status::Clean })
}

fn cmd_update(
    old: &Policy,
    new: &Policy,
    output: Option<&str>,
    csv: bool,
    format: fwportion::model::PolicyFormat,
) -> Result<Status> {
    let (updated, report) = update_policy(old, new)?;
    let mut out = String::new();
    if csv {
        out += &csv_table(
            &["old", "new", "finding"],
            report
                .removed_duplicates
                .iter()
                .map(|(o, n)| vec![o.to_string(), n.to_string(), "DUPLICATE_REMOVED".to_string()])
                .chain(report.relation_findings.iter().map(|f| {
                    vec![f.first.to_string(), f.second.to_string(), f.relation.class.as_str().to_string()]
                })),
        )?;
        out.push('\n');
        out += &csv_table(
            &["stat", "value"],
            [
                vec!["resulting_rule_count".to_string(), report.resulting_rule_count.to_string()],
                vec!["semantic_delta".to_string(), report.semantic_delta.to_string()],
            ],
        )?;
    } else {
        for (o, n) in &report.removed_duplicates {
            writeln!(out, "old rule {o} duplicates new rule {n}: removed")?;
        }
        for f in &report.relation_findings {
            writeln!(out, "old rule {} / new rule {}: {}", f.first, f.second, f.relation.class.as_str())?;
        }
        writeln!(out, "resulting rules: {}", report.resulting_rule_count)?;
        writeln!(out, "packets with changed decision: {}", report.semantic_delta)?;
    }
    let policy_text = serialize_policy(&updated, format);
    match output {
        Some(path) if path != "-" => {
            write_output(Some(path), &policy_text)?;
            print!("{out}");
        }
        _ => {
            print!("{policy_text}");
            eprint!("{out}");
        }
    }
    Ok(Status::Clean)
}

fn cmd_match(policy: &Policy, packet: &str, csv: bool) -> Result<Status> {
    let pkt = parse_packet(packet, policy.domain()).context("packet")?;
    let plist = partition(policy);
    let (index, portion) = plist.locate(&pkt)?;
    let decision = portion.decision();
    if csv {
        print!(
            "{}",
            csv_table(
                &["action", "rule", "portion"],
                [vec![decision.action.to_string(), rule_label(decision.rule), (index + 1).to_string()]],
            )?
        );
    } else {
        let by = match decision.rule {
            Some(r) => format!("rule {r}"),
            None => "default".to_string(),
        };
        println!("{} by {by} (portion {})", decision.action, index + 1);
    }
    Ok(Status::Clean)
}

/// Parses a log, reporting malformed lines on stderr. Returns the records and
/// whether any line was rejected.
fn load_log(path: &str) -> Result<(Vec<LogRecord>, bool)> {
    let text = read_input(path)?;
    let (records, errors) = parse_log(&text);
    for (line, e) in &errors {
        eprintln!("fwportion: {path}: line {line}: {e}");
    }
    Ok((records.into_iter().map(|(_, r)| r).collect(), !errors.is_empty()))
}

fn port_text(p: Option<u16>) -> String {
    p.map_or_else(String::new, |p| p.to_string())
}

fn cmd_logstats(path: &str, csv: bool) -> Result<Status> {
    let (records, malformed) = load_log(path)?;
    let stats = traffic_stats(&records);
    let mut out = String::new();
    if csv {
        let mut rows = vec![vec!["total".to_string(), String::new(), stats.total.to_string(), String::new()]];
        for (p, n) in &stats.per_protocol_counts {
            rows.push(vec![
                "protocol".into(),
                p.clone(),
                n.to_string(),
                format!("{:.2}", stats.per_protocol_percent[p]),
            ]);
        }
        for (a, n) in &stats.verdict_counts {
            rows.push(vec!["verdict".into(), a.to_string(), n.to_string(), String::new()]);
        }
        for (f, n) in &stats.flag_counts {
            rows.push(vec!["flag".into(), f.to_string(), n.to_string(), String::new()]);
        }
        out += &csv_table(&["stat", "key", "count", "percent"], rows)?;
        out.push('\n');
        out += &csv_table(
            &["src_ip", "src_port", "protocol", "dst_ip", "dst_port"],
            records.iter().map(|r| {
                let s = extract_significant(r);
                vec![
                    s.source.ip.to_string(),
                    port_text(s.source.port),
                    s.source.protocol,
                    s.target.ip.to_string(),
                    port_text(s.target.port),
                ]
            }),
        )?;
    } else {
        writeln!(out, "records: {}", stats.total)?;
        writeln!(out, "protocols:")?;
        for (p, n) in &stats.per_protocol_counts {
            writeln!(out, "  {p:<8} {n:>8} {:>7.2}%", stats.per_protocol_percent[p])?;
        }
        writeln!(out, "verdicts:")?;
        for (a, n) in &stats.verdict_counts {
            writeln!(out, "  {:<8} {n:>8}", a.as_str())?;
        }
        writeln!(out, "tcp flags:")?;
        for (f, n) in &stats.flag_counts {
            writeln!(out, "  {:<8} {n:>8}", f.as_str())?;
        }
        writeln!(out, "significant fields:")?;
        writeln!(out, "  {:<15} {:>5} {:<5}  {:<15} {:>5}", "source", "port", "proto", "target", "port")?;
        for r in &records {
            let s = extract_significant(r);
            writeln!(
                out,
                "  {:<15} {:>5} {:<5}  {:<15} {:>5}",
                s.source.ip.to_string(),
                port_text(s.source.port),
                s.source.protocol,
                s.target.ip.to_string(),
                port_text(s.target.port)
            )?;
        }
    }
    print!("{out}");
    if malformed {
        bail!("{path}: malformed log lines");
    }
    Ok(Status::Clean)
}

fn cmd_replay(path: &str, policy: &Policy, mode: DirectionMode, csv: bool) -> Result<Status> {
    let (records, malformed) = load_log(path)?;
    let plist = partition(policy);
    let report = replay_with(&records, &plist, mode);
    for (i, e) in &report.skipped {
        eprintln!("fwportion: record {}: skipped: {e}", i + 1);
    }
    let mut out = String::new();
    if csv {
        out += &csv_table(
            &["record", "logged", "decided", "rule"],
            report.mismatches.iter().map(|m| {
                vec![
                    (m.record + 1).to_string(),
                    m.logged.to_string(),
                    m.decided.action.to_string(),
                    rule_label(m.decided.rule),
                ]
            }),
        )?;
    } else {
        for m in &report.mismatches {
            writeln!(
                out,
                "record {}: logged {}, policy says {} by {}",
                m.record + 1,
                m.logged,
                m.decided.action,
                rule_label(m.decided.rule)
            )?;
            writeln!(out, "  {}", records[m.record])?;
        }
        writeln!(
            out,
            "{} checked, {} mismatches, {} skipped",
            report.checked,
            report.mismatches.len(),
            report.skipped.len()
        )?;
    }
    print!("{out}");
    if malformed {
        bail!("{path}: malformed log lines");
    }
    Ok(if report.mismatches.is_empty() { Status::Clean } else { Status::Findings })
}

fn cmd_baseline(path: &str, output: Option<&str>) -> Result<Status> {
    let text = read_input(path)?;
    let (config, _) = parse_framework_xml(&text).with_context(|| path.to_string())?;
    let baseline = generate_baseline(&config).with_context(|| path.to_string())?;
    write_output(output, &baseline.to_csv())?;
    Ok(Status::Clean)
}

fn cmd_topology(path: &str) -> Result<Status> {
    let text = read_input(path)?;
    let (_, topology) = parse_framework_xml(&text).with_context(|| path.to_string())?;
    let violations = validate_topology(&topology);
    for v in &violations {
        println!("{v}");
    }
    if violations.is_empty() {
        println!("topology ok: {} links checked", topology.links().len());
        Ok(Status::Clean)
    } else {
        Ok(Status::Findings)
    }
}
