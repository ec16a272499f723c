//! HOTA and CLEAR-MOT on tiny hand-built sequences: a perfect tracker, one
//! that changes an object's id halfway through, and one that swaps two
//! objects' ids.

use motskit::config::CLASS_CAR;
use motskit::mask::BBox;
use motskit::metrics::{clear_mot, evaluate, hota, EvalInput, EvalMode, EvalObject};

fn boxes(ids: [u32; 2]) -> Vec<EvalObject> {
    vec![
        EvalObject::bbox(ids[0], CLASS_CAR, BBox::new(0.0, 0.0, 10.0, 10.0).unwrap()),
        EvalObject::bbox(ids[1], CLASS_CAR, BBox::new(20.0, 0.0, 30.0, 10.0).unwrap()),
    ]
}

fn main() {
    let gt: Vec<_> = (0..10).map(|_| boxes([1, 2])).collect();

    let perfect = EvalInput {
        mode: EvalMode::Bbox,
        gt: gt.clone(),
        pred: gt.clone(),
    };
    let h = hota(&perfect, CLASS_CAR);
    println!("perfect:  HOTA {:.4} DetA {:.4} AssA {:.4}", h.hota, h.deta, h.assa);

    // the first object is reported as 7, then as 9 from frame 5 on
    let switched = EvalInput {
        mode: EvalMode::Bbox,
        gt: gt.iter().map(|f| f[..1].to_vec()).collect(),
        pred: (0..10).map(|f| boxes([if f < 5 { 7 } else { 9 }, 8])[..1].to_vec()).collect(),
    };
    let h = hota(&switched, CLASS_CAR);
    let c = clear_mot(&switched, CLASS_CAR, 0.5);
    println!(
        "switched: HOTA {:.4} (sqrt 0.5 = {:.4}) AssA {:.4} IDSW {}",
        h.hota,
        0.5f64.sqrt(),
        h.assa,
        c.idsw
    );

    // ids 7 and 8 trade places at frame 5
    let swapped = EvalInput {
        mode: EvalMode::Bbox,
        gt,
        pred: (0..10).map(|f| boxes(if f < 5 { [7, 8] } else { [8, 7] })).collect(),
    };
    let h = hota(&swapped, CLASS_CAR);
    let c = clear_mot(&swapped, CLASS_CAR, 0.5);
    println!("swapped:  HOTA {:.4} DetA {:.4} AssA {:.4}", h.hota, h.deta, h.assa);
    println!("          MOTA {:.4} IDSW {}", c.mota, c.idsw);

    println!("\n{}", evaluate(&swapped, None));
}
