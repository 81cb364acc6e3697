use std::fmt::Write;

use super::{control_dependencies, data_dependencies, DependencyMatrix};
use crate::pystmt::StatementTree;

fn escape(s: &str) -> String {
    s.chars()
        .flat_map(|c| match c {
            '"' => vec!['\\', '"'],
            '\\' => vec!['\\', '\\'],
            '\n' => vec!['\\', 'n'],
            c => vec![c],
        })
        .collect()
}

/// Graphviz digraph of the matrix. Data edges are red, control edges black
/// and dashed; an edge that is both is drawn twice.
pub fn export_dot(matrix: &DependencyMatrix, tree: &StatementTree) -> String {
    let data = data_dependencies(tree);
    let control = control_dependencies(tree);
    let shown = tree.len().min(matrix.size());
    let mut out = String::from("digraph pdg {\n    node [shape=box];\n");
    for s in tree.statements.iter().take(shown) {
        let text: Vec<&str> = s.raw_tokens.iter().map(|t| t.text.as_str()).collect();
        let mut label = format!("S{}: {:?}", s.index, s.kind);
        if !text.is_empty() {
            label.push(' ');
            label.push_str(&text.join(" "));
        }
        let _ = writeln!(out, "    S{} [label=\"{}\"];", s.index, escape(&label));
    }
    for (i, j) in matrix.edges() {
        if data.contains(&(i, j)) {
            let _ = writeln!(out, "    S{i} -> S{j} [color=red, class=data];");
        }
        if control.contains(&(i, j)) {
            let _ = writeln!(out, "    S{i} -> S{j} [color=black, style=dashed, class=control];");
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdg::{build_matrix, DependencyMode};
    use crate::pystmt::segment;
    use graphviz_rust::dot_structures::{Edge, EdgeTy, Graph, Id, Stmt, Vertex};

    fn parse(dot: &str) -> Graph {
        graphviz_rust::parse(dot).unwrap_or_else(|e| panic!("invalid DOT: {e}\n{dot}"))
    }

    fn plain(id: &Id) -> String {
        match id {
            Id::Plain(s) | Id::Escaped(s) | Id::Html(s) => s.clone(),
            Id::Anonymous(s) => s.clone(),
        }
    }

    type ParsedEdge = (String, String, Vec<(String, String)>);

    fn edges(g: &Graph) -> Vec<ParsedEdge> {
        let Graph::DiGraph { stmts, .. } = g else { panic!("not a digraph") };
        stmts
            .iter()
            .filter_map(|s| match s {
                Stmt::Edge(Edge { ty: EdgeTy::Pair(Vertex::N(a), Vertex::N(b)), attributes }) => Some((
                    plain(&a.0),
                    plain(&b.0),
                    attributes.iter().map(|a| (plain(&a.0), plain(&a.1))).collect(),
                )),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn binary_search_data_edge_styled() {
        let src = "def binarySearch (arr, l, r, x):\n    if r >= l:\n        mid = int(l + (r - l)/2)\n        if arr[mid] == x:\n            return mid\n        elif arr[mid] > x:\n            return binarySearch(arr, l, mid-1, x)\n        else:\n            return binarySearch(arr, mid+1, r, x)\n    else:\n        return -1\n";
        let tree = segment(src).unwrap();
        let dot = export_dot(&build_matrix(&tree, DependencyMode::Full, 20), &tree);
        let g = parse(&dot);
        let es = edges(&g);
        let e64 = es.iter().find(|(a, b, _)| a == "S6" && b == "S4").expect("S6 -> S4");
        assert!(e64.2.contains(&("color".into(), "red".into())));
        let e103 = es.iter().find(|(a, b, _)| a == "S10" && b == "S3").expect("S10 -> S3");
        assert!(e103.2.contains(&("color".into(), "black".into())));
    }

    #[test]
    fn empty_edge_set_has_nodes_only() {
        let tree = segment("def f():\n    pass\n").unwrap();
        let dot = export_dot(&build_matrix(&tree, DependencyMode::Full, 20), &tree);
        let g = parse(&dot);
        assert!(edges(&g).is_empty());
        let Graph::DiGraph { stmts, .. } = g else { unreachable!() };
        assert_eq!(stmts.iter().filter(|s| matches!(s, Stmt::Node(_))).count(), 3);
    }

    #[test]
    fn labels_with_quotes_still_parse() {
        let tree = segment("def f(s):\n    return s.replace('\"', \"\\\\\")\n").unwrap();
        let dot = export_dot(&build_matrix(&tree, DependencyMode::Full, 20), &tree);
        parse(&dot);
    }
}
