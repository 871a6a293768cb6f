//! The evaluation metrics on small hand-made inputs.

use canmt::eval::{corpus_bleu, edit_distance, pearson, sentence_bleu, spearman, znorm_combine, ScoreSeries};

fn main() -> canmt::Result<()> {
    let reference: Vec<&str> = "the cat sat on the mat".split(' ').collect();
    for hyp in ["the cat sat on the mat", "the cat sat on a mat", "a dog sat on the rug", "mat"] {
        let h: Vec<&str> = hyp.split(' ').collect();
        println!("{hyp:<24} BLEU {:>6.2}  edits {}", sentence_bleu(&h, &reference), edit_distance(&h, &reference));
    }
    let kitten: Vec<char> = "kitten".chars().collect();
    let sitting: Vec<char> = "sitting".chars().collect();
    println!("kitten -> sitting: {} edits", edit_distance(&kitten, &sitting));
    println!("corpus BLEU {:.2}", corpus_bleu(&[(vec![1, 2, 3, 4], vec![1, 2, 3, 4]), (vec![1, 2, 5], vec![1, 2, 3])]));

    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    let y = [1.0, 4.0, 9.0, 16.0, 100.0];
    println!("pearson {:.4}  spearman {:.4}", pearson(&x, &y)?, spearman(&x, &y)?);

    let a = ScoreSeries::from_values("a", &x);
    let b = ScoreSeries::from_values("b", &y);
    println!("z-normalized sum of a and b: {:?}", znorm_combine(&a, &b)?.values().iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>());
    Ok(())
}
