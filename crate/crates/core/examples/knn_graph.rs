//! Two-scale k-NN graphs over three point clouds and the GCN propagation
//! operator built from them.

use icicle::graph::{build_knn_graph, normalize_adjacency};
use icicle::tensor::Tensor;

fn main() -> icicle::Result<()> {
    let points = Tensor::from_rows(&[
        [0.0, 0.0],
        [0.1, 0.0],
        [0.0, 0.2],
        [3.0, 3.0],
        [3.2, 3.1],
        [2.9, 3.3],
        [-3.0, 2.5],
        [-3.1, 2.7],
    ])?;
    for k in [1, 3] {
        let graph = build_knn_graph(&points, k, 1.0)?;
        let degrees: Vec<usize> = (0..graph.num_nodes()).map(|i| graph.degree(i)).collect();
        println!("k = {k}: {} edges, degrees {degrees:?}", graph.edges().len());
        print!("{}", graph.edge_list_text());
        let adj = normalize_adjacency(&graph);
        let m = adj.matrix();
        println!("normalized row 0: {:?}", &m.row(0).iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>());
    }
    Ok(())
}
