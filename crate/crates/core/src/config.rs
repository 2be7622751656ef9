//! Experiment configuration files.
//!
//! The format is flat `key = value` text. Global keys come first; each
//! `[scenario]` line opens a new scenario block. Blank lines and lines
//! starting with `#` are ignored.
//!
//! ```text
//! master_seed = 7
//! reps = 100000
//! output = results.csv
//! checks = fact1,optprog
//!
//! [scenario]
//! id = exp-competition
//! dist = exp:1
//! n = 6
//! k = 3
//! structure = competition
//! model = surplus
//! mechanism = ipm
//! ```

use crate::agents::{BehaviorModel, StructureSpec};
use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::mechanisms::OrderPolicy;
use crate::simulation::{MechanismKind, Scenario};
use crate::theory::CHECK_NAMES;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    /// Default replicate count for scenarios that do not set one.
    pub reps: Option<usize>,
    pub output: Option<String>,
    pub checks: Vec<String>,
    pub scenarios: Vec<Scenario>,
}

fn parse_err(line: usize, text: &str, reason: impl Into<String>) -> Error {
    Error::parse(text, format!("line {line}: {}", reason.into()))
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| parse_err(line, value, format!("invalid value for `{key}`")))
}

fn parse_reps(line: usize, value: &str) -> Result<usize> {
    let reps: usize = parse_value(line, "reps", value)?;
    if reps == 0 {
        return Err(parse_err(line, value, "reps must be at least 1"));
    }
    Ok(reps)
}

fn parse_list(value: &str) -> Vec<String> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

#[derive(Default)]
struct Block {
    line: usize,
    id: Option<String>,
    dist: Option<Distribution>,
    n: Option<usize>,
    k: Option<usize>,
    etas: Option<Vec<f64>>,
    structure: Option<StructureSpec>,
    model: Option<BehaviorModel>,
    mechanism: Option<MechanismKind>,
    order: Option<OrderPolicy>,
    epsilon: Option<f64>,
    reps: Option<usize>,
    seed: Option<u64>,
}

impl Block {
    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        let wrap = |e: Error| parse_err(line, value, e.to_string());
        match key {
            "id" => self.id = Some(value.to_string()),
            "dist" => self.dist = Some(value.parse().map_err(wrap)?),
            "n" => self.n = Some(parse_value(line, key, value)?),
            "k" => self.k = Some(parse_value(line, key, value)?),
            "etas" => {
                let etas = value
                    .split(',')
                    .map(|x| x.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<f64>, _>>()
                    .map_err(|_| parse_err(line, value, "etas must be a comma-separated list of numbers"))?;
                self.etas = Some(etas);
            }
            "structure" => self.structure = Some(value.parse().map_err(wrap)?),
            "model" => self.model = Some(value.parse().map_err(wrap)?),
            "mechanism" => self.mechanism = Some(value.parse().map_err(wrap)?),
            "order" => self.order = Some(value.parse().map_err(wrap)?),
            "epsilon" => self.epsilon = Some(parse_value(line, key, value)?),
            "reps" => self.reps = Some(parse_reps(line, value)?),
            "seed" => self.seed = Some(parse_value(line, key, value)?),
            _ => return Err(parse_err(line, key, format!("unknown scenario key `{key}`"))),
        }
        Ok(())
    }

    fn finish(self, index: usize, master_seed: u64, default_reps: Option<usize>) -> Result<Scenario> {
        let line = self.line;
        let missing = |key: &str| parse_err(line, "[scenario]", format!("missing `{key}`"));
        let dist = self.dist.ok_or_else(|| missing("dist"))?;
        let n = self.n.ok_or_else(|| missing("n"))?;
        let k = match (self.k, &self.etas) {
            (Some(k), _) => k,
            (None, Some(etas)) => etas.len(),
            (None, None) => return Err(missing("k")),
        };
        let reps = self.reps.or(default_reps).ok_or_else(|| missing("reps"))?;
        let mechanism = self.mechanism.unwrap_or(if self.etas.is_some() {
            MechanismKind::HeterogeneousIpm
        } else {
            MechanismKind::Ipm
        });
        let scenario = Scenario {
            id: self.id.unwrap_or_else(|| format!("scenario{}", index + 1)),
            dist,
            n,
            k,
            etas: self.etas,
            structure: self.structure.unwrap_or(StructureSpec::Competition),
            model: self.model.unwrap_or(BehaviorModel::SurplusMax),
            mechanism,
            order: self.order.unwrap_or_default(),
            epsilon: self.epsilon.unwrap_or(0.0),
            reps,
            master_seed: self.seed.unwrap_or(master_seed),
        };
        if scenario.id.contains(',') {
            return Err(parse_err(line, &scenario.id, "scenario ids cannot contain commas"));
        }
        scenario.validate().map_err(|e| parse_err(line, &scenario.id, e.to_string()))?;
        Ok(scenario)
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut master_seed: Option<u64> = None;
        let mut reps = None;
        let mut output = None;
        let mut checks = Vec::new();
        let mut blocks: Vec<Block> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if trimmed == "[scenario]" {
                blocks.push(Block { line, ..Block::default() });
                continue;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| parse_err(line, trimmed, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(block) = blocks.last_mut() {
                block.set(line, key, value)?;
                continue;
            }
            match key {
                "master_seed" => master_seed = Some(parse_value(line, key, value)?),
                "reps" => reps = Some(parse_reps(line, value)?),
                "output" => output = Some(value.to_string()),
                "checks" => {
                    checks = parse_list(value);
                    if let Some(bad) = checks.iter().find(|c| !CHECK_NAMES.contains(&c.as_str())) {
                        return Err(parse_err(line, bad, format!("unknown check `{bad}`")));
                    }
                }
                _ => return Err(parse_err(line, key, format!("unknown key `{key}`"))),
            }
        }
        let master_seed =
            master_seed.ok_or_else(|| Error::parse("", "`master_seed` is required; runs are never seeded from the clock"))?;
        let scenarios = blocks
            .into_iter()
            .enumerate()
            .map(|(i, b)| b.finish(i, master_seed, reps))
            .collect::<Result<Vec<_>>>()?;
        Ok(ExperimentConfig { master_seed, reps, output, checks, scenarios })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::parse(&path.display().to_string(), format!("cannot read: {e}")))?;
        Self::parse(&text)
    }

    /// Serializes with every scenario field explicit, so re-parsing yields
    /// identical scenarios.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "master_seed = {}", self.master_seed);
        if let Some(r) = self.reps {
            let _ = writeln!(s, "reps = {r}");
        }
        if let Some(o) = &self.output {
            let _ = writeln!(s, "output = {o}");
        }
        if !self.checks.is_empty() {
            let _ = writeln!(s, "checks = {}", self.checks.join(","));
        }
        for sc in &self.scenarios {
            let _ = writeln!(s, "\n[scenario]");
            let _ = writeln!(s, "id = {}", sc.id);
            let _ = writeln!(s, "dist = {}", sc.dist);
            let _ = writeln!(s, "n = {}", sc.n);
            let _ = writeln!(s, "k = {}", sc.k);
            if let Some(etas) = &sc.etas {
                let list: Vec<String> = etas.iter().map(|e| format!("{e:?}")).collect();
                let _ = writeln!(s, "etas = {}", list.join(","));
            }
            let _ = writeln!(s, "structure = {}", sc.structure);
            let _ = writeln!(s, "model = {}", sc.model);
            let _ = writeln!(s, "mechanism = {}", sc.mechanism);
            let _ = writeln!(s, "order = {}", sc.order);
            let _ = writeln!(s, "epsilon = {:?}", sc.epsilon);
            let _ = writeln!(s, "reps = {}", sc.reps);
            let _ = writeln!(s, "seed = {}", sc.master_seed);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# sample
master_seed = 11
reps = 5000
checks = fact1, optprog

[scenario]
id = a
dist = exp:1
n = 6
k = 3
structure = balanced:2
model = monopolist

[scenario]
dist = exp:1
n = 6
etas = 1,0.5,0.25
order = reverse_size
reps = 100
seed = 3
";

    #[test]
    fn parses_sample() {
        let c = ExperimentConfig::parse(SAMPLE).unwrap();
        assert_eq!(c.master_seed, 11);
        assert_eq!(c.checks, vec!["fact1", "optprog"]);
        assert_eq!(c.scenarios.len(), 2);
        let a = &c.scenarios[0];
        assert_eq!((a.n, a.k, a.reps, a.master_seed), (6, 3, 5000, 11));
        assert_eq!(a.model, BehaviorModel::Monopolist);
        let b = &c.scenarios[1];
        assert_eq!(b.id, "scenario2");
        assert_eq!(b.k, 3);
        assert_eq!(b.mechanism, MechanismKind::HeterogeneousIpm);
        assert_eq!(b.order, OrderPolicy::ReverseSize);
        assert_eq!((b.reps, b.master_seed), (100, 3));
    }

    #[test]
    fn round_trips() {
        let c = ExperimentConfig::parse(SAMPLE).unwrap();
        let again = ExperimentConfig::parse(&c.to_text()).unwrap();
        assert_eq!(c.scenarios, again.scenarios);
        assert_eq!(again.to_text(), c.to_text());
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            "reps = 10\n[scenario]\ndist = exp:1\nn = 2\nk = 1\n",
            "master_seed = 1\nreps = 0\n",
            "master_seed = 1\n[scenario]\ndist = exp:1\nn = 2\nk = 1\nreps = 0\n",
            "master_seed = 1\n[scenario]\ndist = exp:1\nn = 2\nk = 1\n",
            "master_seed = 1\nreps = 5\n[scenario]\ndist = gauss:1\nn = 2\nk = 1\n",
            "master_seed = 1\nreps = 5\n[scenario]\ndist = exp:1\nn = 2\nk = 3\n",
            "master_seed = 1\nreps = 5\n[scenario]\ndist = exp:1\nn = 2\nk = 1\ncolour = red\n",
            "master_seed = 1\nchecks = nonexistent\n",
            "master_seed = 1\njunk line\n",
            "master_seed = x\n",
        ];
        for text in cases {
            assert!(matches!(ExperimentConfig::parse(text), Err(Error::Parse { .. })), "{text}");
        }
    }
}
