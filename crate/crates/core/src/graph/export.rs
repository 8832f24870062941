use std::fmt::Write as _;

use serde::Serialize;

use super::{Direction, SyntaxGraph};

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering of every directed edge: arcs in both directions are
/// solid, self-loops dashed. Edge labels carry the direction suffix.
pub fn to_dot(graph: &SyntaxGraph) -> String {
    let mut out = String::from("digraph syntax {\n  node [shape=box];\n");
    for v in 1..=graph.node_count() {
        let _ = writeln!(out, "  n{v} [label=\"{}\"];", escape(graph.form(v)));
    }
    for e in graph.edges() {
        let style = match e.label.direction {
            Direction::Fwd | Direction::Rev => "solid",
            Direction::SelfLoop => "dashed",
        };
        let _ = writeln!(
            out,
            "  n{} -> n{} [label=\"{}\", style={style}];",
            e.from,
            e.to,
            escape(&e.label.to_string())
        );
    }
    out.push_str("}\n");
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphJson<'a> {
    pub nodes: Vec<NodeJson<'a>>,
    pub edge_count: usize,
    pub self_loop_count: usize,
    pub edges: Vec<EdgeJson<'a>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeJson<'a> {
    pub index: usize,
    pub form: &'a str,
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeJson<'a> {
    pub from: usize,
    pub to: usize,
    pub label: &'a str,
    pub direction: Direction,
}

/// Full edge list, self-loops included.
pub fn to_json(graph: &SyntaxGraph) -> GraphJson<'_> {
    GraphJson {
        nodes: (1..=graph.node_count())
            .map(|index| NodeJson {
                index,
                form: graph.form(index),
            })
            .collect(),
        edge_count: graph.edges().len(),
        self_loop_count: graph.self_loops().count(),
        edges: graph
            .edges()
            .iter()
            .map(|e| EdgeJson {
                from: e.from,
                to: e.to,
                label: &e.label.base,
                direction: e.label.direction,
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_syntax_graph;
    use crate::parse::DependencyTree;

    #[test]
    fn dot_styles() {
        let t = DependencyTree::from_words([("Dogs", 2, "nsubj"), ("bark", 0, "root"), ("\"", 2, "punct")]).unwrap();
        let dot = to_dot(&build_syntax_graph(&t).unwrap());
        assert_eq!(dot.matches("style=solid").count(), 4);
        assert_eq!(dot.matches("style=dashed").count(), 3);
        assert!(dot.contains("n3 [label=\"\\\"\"];"));
        assert!(dot.contains("n1 -> n2 [label=\"nsubj:rev\", style=solid];"));
        assert!(dot.contains("n3 -> n3 [label=\"self\", style=dashed];"));
    }

    #[test]
    fn json_lists_self_loops() {
        let t = DependencyTree::from_words([("Dogs", 2, "nsubj"), ("bark", 0, "root")]).unwrap();
        let g = build_syntax_graph(&t).unwrap();
        let v = serde_json::to_value(to_json(&g)).unwrap();
        assert_eq!(v["edge_count"], 4);
        assert_eq!(v["self_loop_count"], 2);
        assert_eq!(v["edges"][2]["direction"], "self");
        assert_eq!(v["edges"][1]["direction"], "rev");
    }
}
