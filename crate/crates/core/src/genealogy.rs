//! Evolutionary event log and the idea genealogy reconstructed from it.
//!
//! Log format, one record per operator application after a fixed header:
//!
//! ```text
//! # initial=0:513|1:77|...
//! step,iteration,agent,operator,parents,child,removed,skipped,child_encoding
//! 1,1,1,replication,0,10,,0,513
//! ```
//!
//! `parents` is `|`-separated, absent values are empty fields and `skipped` is
//! `0` or `1`. Other `#` lines are provenance comments and are ignored on parse.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::evolution::{Instance, InstanceId, OperatorKind, Outcome};
use crate::landscape::Idea;

pub const LOG_HEADER: &str =
    "step,iteration,agent,operator,parents,child,removed,skipped,child_encoding";

const INITIAL_PREFIX: &str = "# initial=";

/// One time-stamped operator application.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvolutionaryEvent {
    /// Global action index, starting at 1.
    pub step: u64,
    /// Rotation number, starting at 1.
    pub iteration: u64,
    /// Acting agent, starting at 1.
    pub agent: usize,
    pub operator: OperatorKind,
    pub parents: Vec<InstanceId>,
    pub child: Option<InstanceId>,
    pub removed: Option<InstanceId>,
    pub skipped: bool,
    pub child_encoding: Option<u64>,
}

impl EvolutionaryEvent {
    pub fn from_outcome(outcome: Outcome, step: u64, iteration: u64, agent: usize) -> Self {
        Self {
            step,
            iteration,
            agent,
            operator: outcome.operator,
            parents: outcome.parents,
            child: outcome.child.map(|c| c.id),
            removed: outcome.removed,
            skipped: outcome.skipped,
            child_encoding: outcome.child.map(|c| c.idea.0),
        }
    }

    /// Recombination that fell back to copying the only instance.
    pub fn is_degenerate(&self) -> bool {
        self.operator == OperatorKind::Recombination && self.parents.len() == 1
    }

    /// Net change in population size caused by this event.
    pub fn size_delta(&self) -> i64 {
        i64::from(self.child.is_some()) - i64::from(self.removed.is_some())
    }

    pub fn to_record(&self) -> String {
        fn opt(v: Option<u64>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        let parents = self
            .parents
            .iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
            .join("|");
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.step,
            self.iteration,
            self.agent,
            self.operator,
            parents,
            opt(self.child),
            opt(self.removed),
            u8::from(self.skipped),
            opt(self.child_encoding),
        )
    }

    pub fn parse_record(line: &str) -> std::result::Result<Self, String> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(format!("expected 9 fields, found {}", fields.len()));
        }
        fn num<T: std::str::FromStr>(name: &str, s: &str) -> std::result::Result<T, String> {
            s.parse().map_err(|_| format!("bad {name} `{s}`"))
        }
        fn opt(name: &str, s: &str) -> std::result::Result<Option<u64>, String> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(name, s).map(Some)
            }
        }
        let parents = if fields[4].is_empty() {
            Vec::new()
        } else {
            fields[4]
                .split('|')
                .map(|p| num("parent", p))
                .collect::<std::result::Result<_, _>>()?
        };
        let skipped = match fields[7] {
            "0" => false,
            "1" => true,
            other => return Err(format!("bad skipped flag `{other}`")),
        };
        Ok(Self {
            step: num("step", fields[0])?,
            iteration: num("iteration", fields[1])?,
            agent: num("agent", fields[2])?,
            operator: fields[3].parse()?,
            parents,
            child: opt("child", fields[5])?,
            removed: opt("removed", fields[6])?,
            skipped,
            child_encoding: opt("child_encoding", fields[8])?,
        })
    }
}

/// The initial population plus every event of a run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventLog {
    pub initial: Vec<Instance>,
    pub events: Vec<EvolutionaryEvent>,
}

impl EventLog {
    pub fn write_to<W: Write>(&self, sink: &mut W) -> io::Result<()> {
        let initial = self
            .initial
            .iter()
            .map(|i| format!("{}:{}", i.id, i.idea.0))
            .collect::<Vec<_>>()
            .join("|");
        writeln!(sink, "{INITIAL_PREFIX}{initial}")?;
        writeln!(sink, "{LOG_HEADER}")?;
        for e in &self.events {
            writeln!(sink, "{}", e.to_record())?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("log text is ASCII")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut log = EventLog::default();
        let mut saw_header = false;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let bad = |reason: String| Error::MalformedLog {
                line: line_no,
                reason,
            };
            let line = raw.trim_end_matches('\r');
            if let Some(rest) = line.strip_prefix(INITIAL_PREFIX) {
                log.initial = parse_initial(rest).map_err(bad)?;
                continue;
            }
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            if !saw_header {
                if line != LOG_HEADER {
                    return Err(bad(format!("expected header `{LOG_HEADER}`")));
                }
                saw_header = true;
                continue;
            }
            log.events
                .push(EvolutionaryEvent::parse_record(line).map_err(bad)?);
        }
        if !saw_header {
            return Err(Error::MalformedLog {
                line: text.lines().count().max(1),
                reason: "missing header line".into(),
            });
        }
        Ok(log)
    }
}

fn parse_initial(s: &str) -> std::result::Result<Vec<Instance>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split('|')
        .map(|pair| {
            let (id, enc) = pair
                .split_once(':')
                .ok_or_else(|| format!("bad initial entry `{pair}`"))?;
            Ok(Instance {
                id: id.parse().map_err(|_| format!("bad initial id `{id}`"))?,
                idea: Idea(
                    enc.parse()
                        .map_err(|_| format!("bad initial encoding `{enc}`"))?,
                ),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenealogyNode {
    pub id: InstanceId,
    pub encoding: u64,
    /// Step at which the instance was created; 0 for the initial population.
    pub birth_step: u64,
    pub death_step: Option<u64>,
    pub parents: Vec<InstanceId>,
    pub children: Vec<InstanceId>,
}

/// Parent-to-child graph over every instance that ever existed in a run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GenealogyDag {
    nodes: BTreeMap<InstanceId, GenealogyNode>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenealogyStats {
    pub roots: usize,
    pub nodes: usize,
    pub edges: usize,
    /// Share of nodes with children that have at least two.
    pub branching_ratio: f64,
    /// Longest parent-to-child path, in edges.
    pub max_depth: usize,
}

fn expected_parents(event: &EvolutionaryEvent) -> bool {
    let n = event.parents.len();
    match event.operator {
        OperatorKind::Replication
        | OperatorKind::RandomPointMutation
        | OperatorKind::IntelligentPointMutation => n == 1,
        OperatorKind::Recombination => n == 1 || n == 2,
        OperatorKind::SubtractiveSelection | OperatorKind::RandomGeneration => n == 0,
    }
}

/// Reconstruct the genealogy, checking the log as it goes: ids are fresh and
/// increasing, parents and removed instances must be alive at that step, and
/// every operator has its expected arity. Removed instances stay in the graph.
pub fn build_genealogy(log: &EventLog) -> Result<GenealogyDag> {
    let mut nodes: BTreeMap<InstanceId, GenealogyNode> = BTreeMap::new();
    let mut alive: HashSet<InstanceId> = HashSet::new();
    for inst in &log.initial {
        if nodes.contains_key(&inst.id) {
            return Err(invalid(0, format!("initial id {} repeated", inst.id)));
        }
        nodes.insert(
            inst.id,
            GenealogyNode {
                id: inst.id,
                encoding: inst.idea.0,
                birth_step: 0,
                death_step: None,
                parents: Vec::new(),
                children: Vec::new(),
            },
        );
        alive.insert(inst.id);
    }
    let mut last_step = 0;
    for e in &log.events {
        if e.step <= last_step {
            return Err(invalid(e.step, "steps must increase".into()));
        }
        last_step = e.step;
        if !expected_parents(e) {
            return Err(invalid(
                e.step,
                format!("{} with {} parents", e.operator, e.parents.len()),
            ));
        }
        for p in &e.parents {
            if !nodes.contains_key(p) {
                return Err(invalid(e.step, format!("dangling parent {p}")));
            }
            if !alive.contains(p) {
                return Err(invalid(e.step, format!("parent {p} was already removed")));
            }
        }
        match (e.operator.adds(), e.child, e.child_encoding) {
            (true, Some(child), Some(encoding)) => {
                if nodes.keys().next_back().is_some_and(|&max| child <= max) {
                    return Err(invalid(e.step, format!("child id {child} is not fresh")));
                }
                for p in &e.parents {
                    let parent = nodes.get_mut(p).expect("checked above");
                    if !parent.children.contains(&child) {
                        parent.children.push(child);
                    }
                }
                let mut parents = e.parents.clone();
                parents.dedup();
                nodes.insert(
                    child,
                    GenealogyNode {
                        id: child,
                        encoding,
                        birth_step: e.step,
                        death_step: None,
                        parents,
                        children: Vec::new(),
                    },
                );
                alive.insert(child);
            }
            (false, None, None) => match (e.removed, e.skipped) {
                (Some(r), false) => {
                    if !alive.remove(&r) {
                        return Err(invalid(
                            e.step,
                            format!("removed instance {r} is not alive"),
                        ));
                    }
                    nodes.get_mut(&r).expect("alive implies present").death_step = Some(e.step);
                }
                (None, true) => {}
                _ => {
                    return Err(invalid(
                        e.step,
                        "subtractive event needs exactly one of removed/skipped".into(),
                    ))
                }
            },
            _ => {
                return Err(invalid(
                    e.step,
                    format!("{} has inconsistent child fields", e.operator),
                ))
            }
        }
    }
    Ok(GenealogyDag { nodes })
}

fn invalid(step: u64, reason: String) -> Error {
    Error::InvalidEvent { step, reason }
}

impl GenealogyDag {
    pub fn nodes(&self) -> impl Iterator<Item = &GenealogyNode> {
        self.nodes.values()
    }

    pub fn node(&self, id: InstanceId) -> Option<&GenealogyNode> {
        self.nodes.get(&id)
    }

    pub fn edges(&self) -> impl Iterator<Item = (InstanceId, InstanceId)> + '_ {
        self.nodes
            .values()
            .flat_map(|n| n.parents.iter().map(move |&p| (p, n.id)))
    }

    /// Node ids in an order where every parent precedes its children.
    pub fn topological_order(&self) -> Vec<InstanceId> {
        // Parents always carry smaller ids, so id order is topological.
        self.nodes.keys().copied().collect()
    }

    pub fn stats(&self) -> GenealogyStats {
        let mut depth: BTreeMap<InstanceId, usize> = BTreeMap::new();
        for n in self.nodes.values() {
            let d = n.parents.iter().map(|p| depth[p] + 1).max().unwrap_or(0);
            depth.insert(n.id, d);
        }
        let inner = self
            .nodes
            .values()
            .filter(|n| !n.children.is_empty())
            .count();
        let branching = self
            .nodes
            .values()
            .filter(|n| n.children.len() >= 2)
            .count();
        GenealogyStats {
            roots: self.nodes.values().filter(|n| n.parents.is_empty()).count(),
            nodes: self.nodes.len(),
            edges: self.nodes.values().map(|n| n.parents.len()).sum(),
            branching_ratio: if inner == 0 {
                0.0
            } else {
                branching as f64 / inner as f64
            },
            max_depth: depth.values().copied().max().unwrap_or(0),
        }
    }

    /// Graphviz rendering; node labels are `<instance_id>:<encoding>` and
    /// removed instances are drawn dashed.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph genealogy {\n");
        for n in self.nodes.values() {
            let style = if n.death_step.is_some() {
                ", style=dashed"
            } else {
                ""
            };
            let _ = writeln!(
                out,
                "  n{} [label=\"{}:{}\"{}];",
                n.id, n.id, n.encoding, style
            );
        }
        for (p, c) in self.edges() {
            let _ = writeln!(out, "  n{p} -> n{c};");
        }
        out.push_str("}\n");
        out
    }
}

pub fn export_log<W: Write>(log: &EventLog, sink: &mut W) -> io::Result<()> {
    log.write_to(sink)
}

pub fn export_dot<W: Write>(dag: &GenealogyDag, sink: &mut W) -> io::Result<()> {
    sink.write_all(dag.to_dot().as_bytes())
}
