//! Compare tape gradients of the joint training loss against central finite
//! differences on a tiny model.

use std::collections::BTreeMap;

use canmt::model::{init_parameters, Forward, ModelConfig, PairBatch, ParameterStore};
use canmt::numerics::{Tape, Var};

fn loss(params: &ParameterStore, batch: &PairBatch) -> f64 {
    let mut tape = Tape::new();
    let mut f = Forward::new(&mut tape, params);
    let a = f.translation_loss(batch, 0.1).unwrap();
    let b = f.reconstruction_loss(batch, 0.1).unwrap();
    tape.value(a)[0] + tape.value(b)[0]
}

fn main() -> canmt::Result<()> {
    let cfg = ModelConfig {
        layers_enc: 1,
        layers_dec: 1,
        layers_est: 1,
        model_dim: 8,
        heads: 2,
        ffn_dim: 16,
        src_vocab_size: 11,
        tgt_vocab_size: 13,
        max_len: 16,
        dropout_rate: 0.0,
        label_smoothing: 0.1,
        share_embeddings: false,
    };
    let mut params = init_parameters(&cfg, 3)?;
    let batch = PairBatch::from_pairs(&[(vec![4, 7, 9], vec![6, 11, 4, 12])])?;

    let grads: BTreeMap<String, Vec<f64>> = {
        let mut tape = Tape::new();
        let mut f = Forward::new(&mut tape, &params).trainable();
        let a = f.translation_loss(&batch, 0.1)?;
        let b = f.reconstruction_loss(&batch, 0.1)?;
        let bound: Vec<(String, Var)> = f.bound().iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let root = tape.add(a, b)?;
        let g = tape.backward(root)?;
        bound.into_iter().filter_map(|(n, v)| g.get(v).map(|x| (n, x.to_vec()))).collect()
    };

    let h = 1e-5;
    for name in ["embed.src", "dec.layer0.self_attn.wq", "dec.layer0.cross_attn.wv", "est.layer0.ffn.w1", "dec.ln_out.gain"] {
        let Some(g) = grads.get(name) else {
            println!("{name}: not a parameter of this model");
            continue;
        };
        let mut worst: f64 = 0.0;
        for i in 0..g.len().min(20) {
            let orig = params.get(name).unwrap().data()[i];
            params.get_mut(name).unwrap().data_mut()[i] = orig + h;
            let up = loss(&params, &batch);
            params.get_mut(name).unwrap().data_mut()[i] = orig - h;
            let down = loss(&params, &batch);
            params.get_mut(name).unwrap().data_mut()[i] = orig;
            worst = worst.max((g[i] - (up - down) / (2.0 * h)).abs());
        }
        println!("{name:<22} max |analytic - numeric| over first 20 entries: {worst:.2e}");
    }
    Ok(())
}
