//! AUC per tag, AUC per clip and precision at k on a small score matrix.

use deepbof::eval::{auc_binary, evaluate};
use ndarray::array;

fn main() -> deepbof::Result<()> {
    let scores = array![
        [0.9, 0.1, 0.4, 0.2],
        [0.8, 0.7, 0.1, 0.3],
        [0.85, 0.6, 0.5, 0.9],
        [0.3, 0.2, 0.8, 0.1],
    ];
    let labels = array![
        [1.0, 0.0, 0.0, 0.0],
        [1.0, 1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 1.0],
        [0.0, 0.0, 1.0, 0.0],
    ];
    for j in 0..4 {
        let auc = auc_binary(scores.column(j), labels.column(j));
        println!("tag {j}: AUC {auc:?}");
    }
    let report = evaluate(scores.view(), labels.view())?;
    print!("{}", report.to_table());
    print!("{}", report.to_delimited());
    Ok(())
}
