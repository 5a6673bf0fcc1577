//! Ordered decision lists induced from partial C4.5 trees (PART).
//!
//! Each iteration grows a partial tree on the instances not yet covered,
//! turns its best leaf into a rule and removes the instances that rule
//! matches. Classification is first-match with a default class at the end.

mod part;

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::eval::macro_f1;
use crate::skipgram::{quote_key, unquote_key, FeatureTable, Level};

pub use part::{added_errors, entropy, leaf_error, PartialNode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InductionParams {
    /// Confidence factor of the pessimistic error estimate, in (0, 1].
    /// Values above 0.5 disable pruning.
    pub confidence: f64,
    /// Minimum number of instances in at least two branches of a split.
    pub min_instances: usize,
}

impl Default for InductionParams {
    fn default() -> Self {
        InductionParams {
            confidence: 0.25,
            min_instances: 2,
        }
    }
}

impl InductionParams {
    /// Unpruned induction: CF = 1, M = 1.
    pub fn unpruned() -> Self {
        InductionParams {
            confidence: 1.0,
            min_instances: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.confidence > 0.0 && self.confidence <= 1.0) || self.min_instances == 0 {
            return Err(Error::Generation(format!(
                "invalid induction parameters CF={} M={}",
                self.confidence, self.min_instances
            )));
        }
        Ok(())
    }
}

pub const CONFIDENCE_GRID: [f64; 3] = [0.1, 0.25, 0.5];
pub const MIN_INSTANCES_GRID: [usize; 4] = [2, 5, 10, 25];

pub fn default_grid() -> Vec<InductionParams> {
    CONFIDENCE_GRID
        .iter()
        .flat_map(|&confidence| {
            MIN_INSTANCES_GRID.iter().map(move |&min_instances| InductionParams {
                confidence,
                min_instances,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Test {
    pub key: String,
    pub level: Level,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub tests: Vec<Test>,
    pub class: Label,
    /// Correctly classified instances among those the rule was learned from.
    pub correct: usize,
    /// Instances the rule was learned from.
    pub covered: usize,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("IF ")?;
        if self.tests.is_empty() {
            f.write_str("TRUE")?;
        }
        for (i, t) in self.tests.iter().enumerate() {
            if i > 0 {
                f.write_str(" AND ")?;
            }
            write!(f, "{}={}", quote_key(&t.key), t.level)?;
        }
        write!(f, " THEN {} ({}/{})", self.class, self.correct, self.covered)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionList {
    pub rules: Vec<Rule>,
    pub default: Label,
    pub params: InductionParams,
}

impl DecisionList {
    /// Number of rules, not counting the default.
    pub fn complexity(&self) -> usize {
        self.rules.len()
    }

    /// Resolves rule keys against table columns.
    pub fn compile(&self, keys: &[String]) -> Result<CompiledList> {
        let index: HashMap<&str, usize> = keys.iter().enumerate().map(|(i, k)| (k.as_str(), i)).collect();
        let rules = self
            .rules
            .iter()
            .map(|r| {
                let tests = r
                    .tests
                    .iter()
                    .map(|t| {
                        index
                            .get(t.key.as_str())
                            .map(|&c| (c, t.level))
                            .ok_or_else(|| Error::ShapeMismatch(format!("rule key {} is not a table column", quote_key(&t.key))))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((tests, r.class))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CompiledList {
            rules,
            default: self.default,
        })
    }

    pub fn predict(&self, table: &FeatureTable) -> Result<Vec<Label>> {
        let compiled = self.compile(&table.keys)?;
        Ok(table.rows.iter().map(|r| compiled.classify(&r.levels)).collect())
    }
}

/// A decision list with tests resolved to column indices.
#[derive(Debug, Clone)]
pub struct CompiledList {
    rules: Vec<(Vec<(usize, Level)>, Label)>,
    default: Label,
}

impl CompiledList {
    /// Index of the first rule matching `levels`, if any.
    pub fn first_match(&self, levels: &[Level]) -> Option<usize> {
        self.rules
            .iter()
            .position(|(tests, _)| tests.iter().all(|&(c, l)| levels[c] == l))
    }

    pub fn classify(&self, levels: &[Level]) -> Label {
        match self.first_match(levels) {
            Some(i) => self.rules[i].1,
            None => self.default,
        }
    }
}

/// Split attribute PART would choose at the root of `table`, or `None` if the
/// root is a leaf.
pub fn root_split(table: &FeatureTable, params: &InductionParams) -> Option<String> {
    let data = part::Data::new(table);
    let rows: Vec<usize> = (0..table.len()).collect();
    part::choose_split(&data, &rows, params).map(|s| table.keys[s.attribute].clone())
}

/// Grows one partial tree over all rows of `table`.
pub fn build_partial_tree(table: &FeatureTable, params: &InductionParams) -> Result<PartialNode> {
    if table.is_empty() {
        return Err(Error::NoInstances);
    }
    let data = part::Data::new(table);
    let rows: Vec<usize> = (0..table.len()).collect();
    Ok(part::build_partial_tree(&data, &rows, params))
}

/// Induces a decision list whose rules cover every row of `table`. Row labels
/// are the classes to explain.
pub fn induce_decision_list(table: &FeatureTable, params: &InductionParams) -> Result<DecisionList> {
    params.validate()?;
    if table.is_empty() {
        return Err(Error::NoInstances);
    }
    let data = part::Data::new(table);
    let mut residual: Vec<usize> = (0..table.len()).collect();
    let mut rules = Vec::new();
    while !residual.is_empty() {
        let tree = part::build_partial_tree(&data, &residual, params);
        let leaves = part::leaves(&tree);
        let best = part::best_leaf(data.keys, &leaves).ok_or(Error::RuleCoversNothing)?;
        let class = part::class_of(&best.counts);
        let before = residual.len();
        let mut covered = 0;
        let mut correct = 0;
        residual.retain(|&r| {
            let hit = best
                .tests
                .iter()
                .all(|&(a, l)| data.columns[a][r] as usize == l.index());
            if hit {
                covered += 1;
                correct += usize::from(data.labels[r] as usize == class.index());
            }
            !hit
        });
        if residual.len() == before {
            return Err(Error::RuleCoversNothing);
        }
        rules.push(Rule {
            tests: best
                .tests
                .iter()
                .map(|&(a, level)| Test {
                    key: table.keys[a].clone(),
                    level,
                })
                .collect(),
            class,
            correct,
            covered,
        });
    }
    let all: Vec<usize> = (0..table.len()).collect();
    Ok(DecisionList {
        rules,
        default: part::class_of(&data.counts(&all)),
        params: *params,
    })
}

/// Grid point chosen by validation macro-F1, with its score.
#[derive(Debug, Clone, PartialEq)]
pub struct Tuned {
    pub params: InductionParams,
    pub valid_f1: f64,
    pub list: DecisionList,
}

/// Induces on `train` for every grid point and keeps the one with the best
/// macro-F1 against the labels of `valid`. Ties prefer larger M, then larger
/// CF.
pub fn tune_params(train: &FeatureTable, valid: &FeatureTable, grid: &[InductionParams]) -> Result<Tuned> {
    if train.keys != valid.keys {
        return Err(Error::ShapeMismatch("train and validation columns differ".into()));
    }
    let reference = valid.labels();
    let scored = grid
        .par_iter()
        .map(|p| {
            let list = induce_decision_list(train, p)?;
            let f1 = macro_f1(&reference, &list.predict(valid)?);
            Ok(Tuned {
                params: *p,
                valid_f1: f1,
                list,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    scored
        .into_iter()
        .reduce(|best, t| {
            let better = t.valid_f1 > best.valid_f1
                || (t.valid_f1 == best.valid_f1
                    && (t.params.min_instances, t.params.confidence)
                        .partial_cmp(&(best.params.min_instances, best.params.confidence))
                        == Some(std::cmp::Ordering::Greater));
            if better {
                t
            } else {
                best
            }
        })
        .ok_or_else(|| Error::Generation("empty induction grid".into()))
}

/// Rule file: `#` provenance lines, a `PARAMS` line, one `IF ... THEN` line
/// per rule and a closing `DEFAULT` line.
pub fn write_rules<W: Write>(mut out: W, list: &DecisionList, provenance: &[String]) -> Result<()> {
    for line in provenance {
        writeln!(out, "# {line}")?;
    }
    writeln!(
        out,
        "PARAMS confidence={} min_instances={}",
        list.params.confidence, list.params.min_instances
    )?;
    for rule in &list.rules {
        writeln!(out, "{rule}")?;
    }
    writeln!(out, "DEFAULT {}", list.default)?;
    out.flush()?;
    Ok(())
}

fn parse_params(line: &str) -> Option<InductionParams> {
    let rest = line.strip_prefix("PARAMS confidence=")?;
    let (cf, m) = rest.split_once(" min_instances=")?;
    Some(InductionParams {
        confidence: cf.parse().ok()?,
        min_instances: m.parse().ok()?,
    })
}

fn parse_rule(line: &str) -> Result<Rule, String> {
    let mut rest = line.strip_prefix("IF ").ok_or("expected 'IF '")?;
    let mut tests = Vec::new();
    if let Some(r) = rest.strip_prefix("TRUE") {
        rest = r;
    } else {
        loop {
            let (key, r) = unquote_key(rest)?;
            let r = r.strip_prefix('=').ok_or("expected '=' after key")?;
            let end = r.find(' ').ok_or("unexpected end of rule")?;
            let level = r[..end].parse::<Level>()?;
            tests.push(Test { key, level });
            rest = &r[end..];
            match rest.strip_prefix(" AND ") {
                Some(r) => rest = r,
                None => break,
            }
        }
    }
    let rest = rest.strip_prefix(" THEN ").ok_or("expected ' THEN '")?;
    let (class, coverage) = rest.split_once(' ').ok_or("expected coverage")?;
    let class = class.parse::<Label>()?;
    let (a, b) = coverage
        .strip_prefix('(')
        .and_then(|c| c.strip_suffix(')'))
        .and_then(|c| c.split_once('/'))
        .ok_or("expected (a/b)")?;
    let correct: usize = a.parse().map_err(|_| "bad coverage count")?;
    let covered: usize = b.parse().map_err(|_| "bad coverage count")?;
    if correct > covered {
        return Err("coverage a exceeds b".into());
    }
    Ok(Rule {
        tests,
        class,
        correct,
        covered,
    })
}

pub fn read_rules<R: BufRead>(input: R) -> Result<DecisionList> {
    let mut params = None;
    let mut rules = Vec::new();
    let mut default = None;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if default.is_some() {
            return Err(Error::parse(line_no, "content after DEFAULT"));
        }
        if line.starts_with("PARAMS") {
            params = Some(parse_params(&line).ok_or_else(|| Error::parse(line_no, "malformed PARAMS line"))?);
        } else if let Some(class) = line.strip_prefix("DEFAULT ") {
            default = Some(class.parse::<Label>().map_err(|e| Error::parse(line_no, e))?);
        } else {
            rules.push(parse_rule(&line).map_err(|e| Error::parse(line_no, e))?);
        }
    }
    Ok(DecisionList {
        rules,
        default: default.ok_or_else(|| Error::parse(0, "missing DEFAULT line"))?,
        params: params.ok_or_else(|| Error::parse(0, "missing PARAMS line"))?,
    })
}
