//! Human-readable exports of tree selectors: a Graphviz DOT digraph and
//! nested plain-text if/else rules. Thresholds and leaf scores are
//! printed in shortest round-trip form, so parsing an export back
//! reproduces the original tree bit for bit — [`verify_export`] checks
//! exactly that on random descriptors.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::metadataset::{Descriptor, FEATURE_NAMES};
use crate::rng::rng_from_seed;
use crate::selectors::{
    predict_scores, tree_input_features, SelectorKind, SelectorModel, SelectorParams, TreeNode,
};

/// Rendered forms of one tree selector.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeExport {
    /// Graphviz digraph; split nodes are ellipses, leaves boxes, edges
    /// labeled true/false.
    pub dot: String,
    /// Nested `if feature <= threshold { … } else { … }` rules.
    pub text: String,
}

/// Input feature names of a tree selector, in split-feature order.
pub fn tree_feature_names(kind: SelectorKind) -> Result<Vec<String>> {
    match kind {
        SelectorKind::Tree => Ok(FEATURE_NAMES.iter().map(|s| s.to_string()).collect()),
        SelectorKind::MimicTree => Ok(vec![
            "|d_sc-0.5|".to_string(),
            "|d_ls-0.5|".to_string(),
            "|d_cs-0.5|".to_string(),
            "r".to_string(),
            "n".to_string(),
            "d".to_string(),
        ]),
        other => Err(Error::DegenerateInput(format!(
            "{} is not a tree selector",
            other.name()
        ))),
    }
}

/// Render a tree selector (plain or mimic) to DOT and text rules.
pub fn export_tree(model: &SelectorModel) -> Result<TreeExport> {
    let root = tree_root(model)?;
    let features = tree_feature_names(model.kind)?;
    let classes = &model.algorithms;
    Ok(TreeExport {
        dot: render_dot(root, &features, classes),
        text: render_text(root, &features, classes),
    })
}

fn tree_root(model: &SelectorModel) -> Result<&TreeNode> {
    match &model.params {
        SelectorParams::Tree { root } => Ok(root),
        _ => Err(Error::DegenerateInput(format!(
            "selector {} holds no tree parameters",
            model.kind.name()
        ))),
    }
}

/// Best-class annotation for a leaf: first maximum of the mean label
/// vector, mirroring the top-logit rule.
fn best_class(value: &[f64], classes: &[String]) -> String {
    let mut best = 0;
    for (i, &v) in value.iter().enumerate().skip(1) {
        if v > value[best] {
            best = i;
        }
    }
    classes
        .get(best)
        .cloned()
        .unwrap_or_else(|| format!("class{best}"))
}

fn scores_line(value: &[f64]) -> String {
    let body = value
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(", ");
    format!("scores = [{body}]")
}

// ---------------------------------------------------------------------------
// DOT
// ---------------------------------------------------------------------------

fn render_dot(root: &TreeNode, features: &[String], classes: &[String]) -> String {
    let mut out = String::from("digraph selector_tree {\n");
    out.push_str("    node [fontname=\"monospace\"];\n");
    out.push_str("    edge [fontname=\"monospace\"];\n");
    let mut next_id = 0usize;
    dot_node(root, features, classes, &mut next_id, &mut out);
    out.push_str("}\n");
    out
}

/// Emit `node` with the next preorder id; returns its id.
fn dot_node(
    node: &TreeNode,
    features: &[String],
    classes: &[String],
    next_id: &mut usize,
    out: &mut String,
) -> usize {
    let id = *next_id;
    *next_id += 1;
    match node {
        TreeNode::Leaf { value, count } => {
            out.push_str(&format!(
                "    n{id} [shape=box, label=\"{}\\nbest: {} ({count} tasks)\"];\n",
                scores_line(value),
                best_class(value, classes),
            ));
        }
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            out.push_str(&format!(
                "    n{id} [shape=ellipse, label=\"{} <= {threshold:?}\"];\n",
                features[*feature]
            ));
            let l = dot_node(left, features, classes, next_id, out);
            out.push_str(&format!("    n{id} -> n{l} [label=\"true\"];\n"));
            let r = dot_node(right, features, classes, next_id, out);
            out.push_str(&format!("    n{id} -> n{r} [label=\"false\"];\n"));
        }
    }
    id
}

// ---------------------------------------------------------------------------
// Text rules
// ---------------------------------------------------------------------------

fn render_text(root: &TreeNode, features: &[String], classes: &[String]) -> String {
    let mut out = String::new();
    text_node(root, features, classes, 0, &mut out);
    out
}

fn text_node(
    node: &TreeNode,
    features: &[String],
    classes: &[String],
    depth: usize,
    out: &mut String,
) {
    let pad = "    ".repeat(depth);
    match node {
        TreeNode::Leaf { value, count } => {
            out.push_str(&format!(
                "{pad}{}  # best: {} ({count} tasks)\n",
                scores_line(value),
                best_class(value, classes),
            ));
        }
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            out.push_str(&format!(
                "{pad}if {} <= {threshold:?} {{\n",
                features[*feature]
            ));
            text_node(left, features, classes, depth + 1, out);
            out.push_str(&format!("{pad}}} else {{\n"));
            text_node(right, features, classes, depth + 1, out);
            out.push_str(&format!("{pad}}}\n"));
        }
    }
}

// ---------------------------------------------------------------------------
// Parsers (for re-evaluation checks)
// ---------------------------------------------------------------------------

fn parse_err(message: impl Into<String>) -> Error {
    Error::DegenerateInput(message.into())
}

fn feature_index(name: &str, features: &[String]) -> Result<usize> {
    features
        .iter()
        .position(|f| f == name)
        .ok_or_else(|| parse_err(format!("unknown feature name '{name}' in exported rules")))
}

fn parse_scores(s: &str) -> Result<Vec<f64>> {
    let inner = s
        .strip_prefix("scores = [")
        .and_then(|rest| rest.split(']').next())
        .ok_or_else(|| parse_err(format!("malformed scores line '{s}'")))?;
    inner
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|e| parse_err(format!("bad score '{tok}': {e}")))
        })
        .collect()
}

/// Parse text rules produced by [`export_tree`] back into a tree.
/// Leaf counts are not part of the prediction and come back as 0.
pub fn parse_text_rules(text: &str, features: &[String]) -> Result<TreeNode> {
    let lines: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    let mut pos = 0usize;
    let root = parse_text_block(&lines, &mut pos, features)?;
    if pos != lines.len() {
        return Err(parse_err(format!(
            "trailing content after rule block at line {pos}"
        )));
    }
    Ok(root)
}

fn parse_text_block(lines: &[&str], pos: &mut usize, features: &[String]) -> Result<TreeNode> {
    let line = lines
        .get(*pos)
        .ok_or_else(|| parse_err("unexpected end of rules"))?;
    if line.starts_with("scores = [") {
        *pos += 1;
        let body = line.split('#').next().unwrap_or(line).trim();
        return Ok(TreeNode::Leaf {
            value: parse_scores(body)?,
            count: 0,
        });
    }
    let cond = line
        .strip_prefix("if ")
        .and_then(|rest| rest.strip_suffix(" {"))
        .ok_or_else(|| parse_err(format!("expected 'if … {{' or scores, got '{line}'")))?;
    let (name, thr) = cond
        .rsplit_once(" <= ")
        .ok_or_else(|| parse_err(format!("malformed condition '{cond}'")))?;
    let feature = feature_index(name, features)?;
    let threshold: f64 = thr
        .parse()
        .map_err(|e| parse_err(format!("bad threshold '{thr}': {e}")))?;
    *pos += 1;
    let left = parse_text_block(lines, pos, features)?;
    if lines.get(*pos) != Some(&"} else {") {
        return Err(parse_err(format!("expected '}} else {{' at line {pos}")));
    }
    *pos += 1;
    let right = parse_text_block(lines, pos, features)?;
    if lines.get(*pos) != Some(&"}") {
        return Err(parse_err(format!("expected closing '}}' at line {pos}")));
    }
    *pos += 1;
    Ok(TreeNode::Split {
        feature,
        threshold,
        left: Box::new(left),
        right: Box::new(right),
    })
}

/// Parse a DOT digraph produced by [`export_tree`] back into a tree.
pub fn parse_dot_rules(dot: &str, features: &[String]) -> Result<TreeNode> {
    if !dot.trim_start().starts_with("digraph") {
        return Err(parse_err("export is not a DOT digraph"));
    }
    let mut labels: Vec<Option<String>> = Vec::new();
    let mut edges: Vec<(usize, usize, bool)> = Vec::new();
    for raw in dot.lines() {
        let line = raw.trim();
        if let Some((from, rest)) = line
            .strip_suffix("];")
            .and_then(|l| l.split_once(" -> "))
            .map(|(a, b)| (a, b))
        {
            let from = parse_node_id(from)?;
            let (to, attr) = rest
                .split_once(" [label=\"")
                .ok_or_else(|| parse_err(format!("edge without label: '{line}'")))?;
            let to = parse_node_id(to)?;
            let truthy = match attr.trim_end_matches('"') {
                "true" => true,
                "false" => false,
                other => return Err(parse_err(format!("unknown edge label '{other}'"))),
            };
            edges.push((from, to, truthy));
        } else if let Some((id_part, rest)) = line.split_once(" [") {
            // Only `nK [...]` declarations; anything else (node/edge
            // style defaults, the digraph header) is not a tree node.
            let Some(id) = id_part
                .strip_prefix('n')
                .and_then(|d| d.parse::<usize>().ok())
            else {
                continue;
            };
            let label = rest
                .split_once("label=\"")
                .and_then(|(_, l)| l.split("\"]").next())
                .ok_or_else(|| parse_err(format!("node without label: '{line}'")))?;
            if labels.len() <= id {
                labels.resize(id + 1, None);
            }
            labels[id] = Some(label.to_string());
        }
    }
    if labels.is_empty() || labels[0].is_none() {
        return Err(parse_err("DOT export has no root node n0"));
    }
    let mut child_true = vec![None; labels.len()];
    let mut child_false = vec![None; labels.len()];
    for (from, to, truthy) in edges {
        if from >= labels.len() || to >= labels.len() {
            return Err(parse_err("DOT edge references an undefined node"));
        }
        let slot = if truthy {
            &mut child_true[from]
        } else {
            &mut child_false[from]
        };
        if slot.replace(to).is_some() {
            return Err(parse_err(format!("node n{from} has duplicate edges")));
        }
    }
    build_dot_node(0, &labels, &child_true, &child_false, features)
}

fn parse_node_id(s: &str) -> Result<usize> {
    s.trim()
        .strip_prefix('n')
        .and_then(|d| d.parse::<usize>().ok())
        .ok_or_else(|| parse_err(format!("malformed node id '{s}'")))
}

fn build_dot_node(
    id: usize,
    labels: &[Option<String>],
    child_true: &[Option<usize>],
    child_false: &[Option<usize>],
    features: &[String],
) -> Result<TreeNode> {
    let label = labels[id]
        .as_ref()
        .ok_or_else(|| parse_err(format!("node n{id} was never defined")))?;
    let head = label.split("\\n").next().unwrap_or(label);
    if head.starts_with("scores = [") {
        return Ok(TreeNode::Leaf {
            value: parse_scores(head)?,
            count: 0,
        });
    }
    let (name, thr) = head
        .rsplit_once(" <= ")
        .ok_or_else(|| parse_err(format!("malformed split label '{head}'")))?;
    let feature = feature_index(name, features)?;
    let threshold: f64 = thr
        .parse()
        .map_err(|e| parse_err(format!("bad threshold '{thr}': {e}")))?;
    let l = child_true[id]
        .ok_or_else(|| parse_err(format!("split n{id} is missing its true edge")))?;
    let r = child_false[id]
        .ok_or_else(|| parse_err(format!("split n{id} is missing its false edge")))?;
    Ok(TreeNode::Split {
        feature,
        threshold,
        left: Box::new(build_dot_node(l, labels, child_true, child_false, features)?),
        right: Box::new(build_dot_node(
            r,
            labels,
            child_true,
            child_false,
            features,
        )?),
    })
}

// ---------------------------------------------------------------------------
// Re-evaluation check
// ---------------------------------------------------------------------------

/// Random plausible descriptors for export verification.
fn random_descriptor(rng: &mut crate::rng::Rng) -> Descriptor {
    Descriptor {
        d_sc: rng.gen_range(0.01..0.99),
        d_ls: rng.gen_range(0.01..0.99),
        d_cs: rng.gen_range(0.01..0.99),
        r: [1.0, 10.0, 100.0][rng.gen_range(0..3usize)],
        n: rng.gen_range(50..=5000),
        d: rng.gen_range(2..=64),
    }
}

/// Re-evaluate both rendered forms against the live model on `count`
/// random descriptors; any score mismatch is an error. Bit-exact
/// equality is required — the export prints full-precision numbers.
pub fn verify_export(
    model: &SelectorModel,
    export: &TreeExport,
    count: usize,
    seed: u64,
) -> Result<()> {
    let features = tree_feature_names(model.kind)?;
    let from_text = parse_text_rules(&export.text, &features)?;
    let from_dot = parse_dot_rules(&export.dot, &features)?;
    let mut rng = rng_from_seed(seed);
    for i in 0..count {
        let descriptor = random_descriptor(&mut rng);
        let live = predict_scores(model, (&descriptor).into())?;
        let z = tree_input_features(model.kind, &descriptor)?;
        for (form, parsed) in [("text", &from_text), ("dot", &from_dot)] {
            let replayed = parsed.predict(&z);
            if replayed != live.as_slice() {
                return Err(Error::DegenerateInput(format!(
                    "{form} rules diverge from the model on input {i}: {replayed:?} vs {live:?}"
                )));
            }
        }
    }
    Ok(())
}
