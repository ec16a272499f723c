//! Encode a mask, print its runs and compressed string, decode it back.

use motskit::mask::{mask_iou, mask_to_bbox, BBox, BinaryMask};
use motskit::rle::Rle;

fn main() -> motskit::Result<()> {
    let mut mask = BinaryMask::from_box(12, 8, &BBox::new(2.0, 1.0, 7.0, 5.0)?)?;
    mask.set(6, 10, true);

    let rle = Rle::encode(&mask);
    let text = rle.to_compressed();
    println!("{}x{} mask, {} pixels set", mask.width(), mask.height(), mask.area());
    println!("runs (column-major, zeros first): {:?}", rle.counts);
    println!("compressed: {text}");

    let back = Rle::from_compressed(&text, 12, 8)?.decode()?;
    assert_eq!(back, mask);

    for r in 0..back.height() {
        let row: String = (0..back.width()).map(|c| if back.get(r, c) { '#' } else { '.' }).collect();
        println!("  {row}");
    }

    let other = BinaryMask::from_box(12, 8, &BBox::new(4.0, 1.0, 9.0, 5.0)?)?;
    println!("tight box {:?}", mask_to_bbox(&mask));
    println!("IoU with shifted box mask: {:.3}", mask_iou(&mask, &other)?);

    // run totals must match the frame
    match Rle::from_compressed(&text, 12, 9) {
        Err(e) => println!("wrong frame size: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
