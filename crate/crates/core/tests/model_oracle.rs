use approx::assert_relative_eq;
use prochart_core::classifier::model::{softmax, ClassifierModel};

// Values frozen from scripts/oracle_toy_mlp.py.
fn toy() -> ClassifierModel {
    ClassifierModel {
        n: 4,
        hidden: 3,
        w1: vec![0.5, -0.2, 0.1, 0.3, 0.8, -0.5, -0.7, 0.1, 0.4, 0.2, -0.3, 0.9],
        b1: vec![0.1, -0.1, 0.05],
        w2: vec![1.0, -0.5, 0.2, -0.3, 0.6, 0.1, 0.4, 0.2, -0.8],
        b2: vec![0.0, 0.1, -0.1],
    }
}

const X: [f64; 4] = [1.0, -0.5, 0.25, 2.0];

fn close(got: &[f64], want: &[f64]) {
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(want) {
        assert_relative_eq!(g, w, max_relative = 1e-12, epsilon = 1e-15);
    }
}

#[test]
fn toy_forward_matches_numpy() {
    let p = toy().forward(&X).unwrap();
    close(&p.logits, &[1.595, 0.22250000000000003, -1.8050000000000002]);
    close(&p.probabilities, &[0.7770939102041557, 0.19697192494607568, 0.02593416484976867]);
    assert_eq!(p.argmax(), 0);
}

#[test]
fn toy_gradient_matches_numpy() {
    let m = toy();
    let (loss, g) = m.loss_and_grad(&[(&X, 2)]).unwrap();
    assert_relative_eq!(loss, 3.652194073364169, max_relative = 1e-12);
    close(&g.b2, &[0.7770939102041557, 0.19697192494607568, -0.9740658351502314]);
    close(
        &g.w2,
        &[
            0.5245383893878051, 0.13295604933860108, -0.6574944387264061, 0.0, 0.0, 0.0, 1.7873159934695582,
            0.453035427375974, -2.240351420845532,
        ],
    );
    close(&g.b1, &[0.48379478070107157, 0.0, 1.1294846171910626]);
    close(
        &g.w1,
        &[
            0.48379478070107157, 0.0, 1.1294846171910626, -0.24189739035053578, 0.0, -0.5647423085955313,
            0.12094869517526789, 0.0, 0.28237115429776566, 0.9675895614021431, 0.0, 2.2589692343821253,
        ],
    );
}

#[test]
fn batch_gradient_is_mean_of_singles() {
    let m = toy();
    let x2 = [0.0, 1.0, -1.0, 0.5];
    let (l1, g1) = m.loss_and_grad(&[(&X, 2)]).unwrap();
    let (l2, g2) = m.loss_and_grad(&[(&x2, 0)]).unwrap();
    let (l, g) = m.loss_and_grad(&[(&X, 2), (&x2, 0)]).unwrap();
    assert_relative_eq!(l, (l1 + l2) / 2.0, max_relative = 1e-12);
    for ((a, b), c) in g.w1.iter().zip(&g1.w1).zip(&g2.w1) {
        assert_relative_eq!(*a, (b + c) / 2.0, epsilon = 1e-14);
    }
    assert_relative_eq!(softmax(&[0.0, 0.0, 0.0])[1], 1.0 / 3.0);
}
