//! Template realization of reasoning trees.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{read_to_string, Error, Result};
use crate::reasoning::{DialogAct, ReasoningTree};
use crate::text::normalize_whitespace;

/// Shape of the realized part of a tree: root only, or the primary middle
/// node with 0, 1 or 2 leaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Arity {
    Root,
    Leaves(u8),
}

impl Arity {
    pub fn of(tree: &ReasoningTree) -> Arity {
        match tree.primary() {
            None => Arity::Root,
            Some(m) => Arity::Leaves(m.children.len().min(2) as u8),
        }
    }
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arity::Root => f.write_str("root"),
            Arity::Leaves(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for Arity {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "root" => Ok(Arity::Root),
            "0" => Ok(Arity::Leaves(0)),
            "1" => Ok(Arity::Leaves(1)),
            "2" => Ok(Arity::Leaves(2)),
            _ => Err(format!("arity must be root, 0, 1 or 2, got `{s}`")),
        }
    }
}

const SLOTS: [&str; 4] = ["{middle}", "{item1}", "{item2}", "{entity}"];

const DEFAULT_TEMPLATES: &str = "\
Recommend\troot\ttell me more about what you like.
Recommend\t0\tdo you like {middle} movies?
Recommend\t1\thave you seen {item1}? it is a great {middle} movie.
Recommend\t2\thave you seen {item1} or {item2}?
Query\troot\ttell me more about what you like.
Query\t0\twhat {middle} do you like?
Query\t1\tdo you like {item1}?
Query\t2\tdo you prefer {item1} or {item2}?
Chat\troot\ttell me more about what you like.
Chat\t0\ti see, {middle}.
Chat\t1\toh, {entity}! i like {item1} too.
Chat\t2\tnice, i like {item1} and {item2}.
";

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    templates: BTreeMap<(DialogAct, Arity), String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::parse(DEFAULT_TEMPLATES).expect("bundled templates parse")
    }
}

impl TemplateSet {
    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?).map_err(|e| e.context(path.display().to_string()))
    }

    /// Parses `act<TAB>arity<TAB>template` lines. Later lines override
    /// earlier ones.
    pub fn parse(text: &str) -> Result<Self> {
        let mut templates = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.splitn(3, '\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(line_no, "expected act<TAB>arity<TAB>template"));
            }
            let act: DialogAct = fields[0].trim().parse().map_err(|_| Error::parse(line_no, format!("unknown act `{}`", fields[0])))?;
            let arity: Arity = fields[1].trim().parse().map_err(|m| Error::parse(line_no, m))?;
            let template = fields[2].trim().to_owned();
            check_slots(&template, arity).map_err(|m| Error::parse(line_no, m))?;
            templates.insert((act, arity), template);
        }
        Ok(TemplateSet { templates })
    }

    /// Default set with the entries of `text` layered on top.
    pub fn with_overrides(text: &str) -> Result<Self> {
        let mut set = Self::default();
        set.templates.extend(Self::parse(text)?.templates);
        Ok(set)
    }

    pub fn get(&self, act: DialogAct, arity: Arity) -> Option<&str> {
        self.templates.get(&(act, arity)).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    /// Errors for every (act, arity) the reasoner can produce but the set
    /// has no template for.
    pub fn check_complete(&self) -> Result<()> {
        for act in DialogAct::ALL {
            for arity in [Arity::Root, Arity::Leaves(0), Arity::Leaves(1), Arity::Leaves(2)] {
                if self.get(act, arity).is_none() {
                    return Err(Error::MissingTemplate { act: act.to_string(), arity: arity.to_string() });
                }
            }
        }
        Ok(())
    }
}

fn check_slots(template: &str, arity: Arity) -> std::result::Result<(), String> {
    let available: &[&str] = match arity {
        Arity::Root => &[],
        Arity::Leaves(0) => &["{middle}", "{entity}"],
        Arity::Leaves(1) => &["{middle}", "{entity}", "{item1}"],
        Arity::Leaves(_) => &SLOTS,
    };
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        let end = rest[start..].find('}').ok_or("unclosed `{` in template")? + start;
        let slot = &rest[start..=end];
        if !SLOTS.contains(&slot) {
            return Err(format!("unknown slot {slot}"));
        }
        if !available.contains(&slot) {
            return Err(format!("slot {slot} cannot be filled at arity {arity}"));
        }
        rest = &rest[end + 1..];
    }
    Ok(())
}

/// Fills the template for the tree's act and shape. Only the primary
/// middle node and its first two leaves are realized; output is
/// lowercased with collapsed whitespace.
pub fn realize(tree: &ReasoningTree, templates: &TemplateSet) -> Result<String> {
    let arity = Arity::of(tree);
    let template = templates
        .get(tree.act, arity)
        .ok_or_else(|| Error::MissingTemplate { act: tree.act.to_string(), arity: arity.to_string() })?;
    let mut out = template.to_owned();
    if let Some(m) = tree.primary() {
        out = out.replace("{middle}", &m.name).replace("{entity}", &m.name);
        for (slot, leaf) in ["{item1}", "{item2}"].iter().zip(&m.children) {
            out = out.replace(slot, &leaf.name);
        }
    }
    Ok(normalize_whitespace(&out.to_lowercase()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::{EntityId, Layer};
    use crate::linalg::Vector;
    use crate::reasoning::{Mode, TreeNode};

    fn node(name: &str, layer: Layer, children: Vec<TreeNode>) -> TreeNode {
        TreeNode {
            id: EntityId::from(name),
            name: name.into(),
            layer,
            score: 0.0,
            gamma: 0.5,
            context: Vector::default(),
            children,
        }
    }

    fn tree(act: DialogAct, middle: Option<(&str, &[&str])>) -> ReasoningTree {
        let nodes: Vec<TreeNode> = middle
            .map(|(m, leaves)| vec![node(m, Layer::Middle, leaves.iter().map(|l| node(l, Layer::Leaf, vec![])).collect())])
            .unwrap_or_default();
        ReasoningTree { act, act_logits: [0.0; 3], mode: Mode::Baseline, flagged: nodes.is_empty(), nodes }
    }

    #[test]
    fn default_set_is_complete() {
        TemplateSet::default().check_complete().unwrap();
    }

    #[test]
    fn golden_realizations() {
        let t = TemplateSet::default();
        assert_eq!(
            realize(&tree(DialogAct::Recommend, Some(("Comedy", &["Click", "The Waterboy"]))), &t).unwrap(),
            "have you seen click or the waterboy?"
        );
        assert_eq!(realize(&tree(DialogAct::Query, Some(("genre", &[]))), &t).unwrap(), "what genre do you like?");
        assert_eq!(realize(&tree(DialogAct::Recommend, None), &t).unwrap(), "tell me more about what you like.");
    }

    #[test]
    fn missing_template_is_reported() {
        let t = TemplateSet::parse("Recommend\t2\thave you seen {item1} or {item2}?\n").unwrap();
        let err = realize(&tree(DialogAct::Query, None), &t).unwrap_err();
        assert!(matches!(err, Error::MissingTemplate { .. }));
        assert!(t.check_complete().is_err());
    }

    #[test]
    fn parse_rejects_bad_lines() {
        assert!(TemplateSet::parse("Recommend\t2").is_err());
        assert!(TemplateSet::parse("Shout\t2\thi").is_err());
        assert!(TemplateSet::parse("Recommend\t3\thi").is_err());
        assert!(TemplateSet::parse("Recommend\t1\t{item2}").is_err());
        assert!(TemplateSet::parse("Recommend\t1\t{weird}").is_err());
        let t = TemplateSet::with_overrides("# comment\n\nQuery\t0\twhich {middle}?\n").unwrap();
        assert_eq!(t.get(DialogAct::Query, Arity::Leaves(0)), Some("which {middle}?"));
    }

    #[test]
    fn items_in_output_come_from_leaves() {
        let t = TemplateSet::default();
        let tr = tree(DialogAct::Recommend, Some(("Horror", &["Leprechaun"])));
        let s = realize(&tr, &t).unwrap();
        assert!(s.contains("leprechaun"));
        assert!(!s.contains("{"));
    }
}
