use std::fs;

use proptest::prelude::*;
use relabel::formats::{
    format_significant, load_dataset, read_dataset_binary, read_dataset_csv, read_model, read_rows, save_dataset,
    write_dataset_binary, write_dataset_csv, write_model, write_rows, CurveRow, RoundRow, SelectionRow, Table,
    TrainingRow, VogRow,
};
use relabel_core::datagen::{generate_gaussian_mixture, inject_symmetric_noise, LabeledDataset, NoiseSpec};
use relabel_core::model::Model;
use relabel_core::Matrix;

fn noisy(seed: u64) -> LabeledDataset {
    let data = generate_gaussian_mixture(4, &[30, 20, 10, 5], 3, 4.0, seed).unwrap();
    inject_symmetric_noise(&data, &NoiseSpec { rate: 0.4, seed }).unwrap()
}

/// The dataset with features rounded to 32-bit precision.
fn as_stored(data: &LabeledDataset) -> LabeledDataset {
    let values: Vec<f64> = data.features().as_slice().iter().map(|&v| v as f32 as f64).collect();
    LabeledDataset::new(
        Matrix::from_vec(data.len(), data.feature_dim(), values).unwrap(),
        data.true_labels().to_vec(),
        data.observed_labels().to_vec(),
        data.class_count(),
    )
    .unwrap()
}

#[test]
fn csv_and_binary_datasets_agree() {
    let dir = tempfile::tempdir().unwrap();
    let data = noisy(3);
    let (csv, bin) = (dir.path().join("d.csv"), dir.path().join("d.nocl"));
    write_dataset_csv(&csv, &data).unwrap();
    write_dataset_binary(&bin, &data).unwrap();
    let from_csv = read_dataset_csv(&csv, Some(4)).unwrap();
    let from_bin = read_dataset_binary(&bin).unwrap();
    assert_eq!(from_csv, as_stored(&data));
    assert_eq!(from_bin, from_csv);
    assert_eq!(load_dataset(&bin, None).unwrap(), from_bin);
    assert_eq!(from_csv.noise_count(), data.noise_count());

    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("f0,f1,f2,true_label,observed_label,noise_flag\n"));
    assert!(!text.contains('\r'));
    let bytes = fs::read(&bin).unwrap();
    assert_eq!(&bytes[..4], b"NOCL");
    assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
    assert_eq!(bytes.len(), 4 + 2 + 8 + 4 + 4 + data.len() * (3 + 2) * 4);
}

#[test]
fn corrupt_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("d.nocl");
    write_dataset_binary(&bin, &noisy(1)).unwrap();
    let bytes = fs::read(&bin).unwrap();
    fs::write(&bin, &bytes[..bytes.len() - 1]).unwrap();
    assert!(read_dataset_binary(&bin).is_err());
    let mut wrong = bytes.clone();
    wrong[0] = b'X';
    fs::write(&bin, &wrong).unwrap();
    assert!(read_dataset_binary(&bin).is_err());

    let csv = dir.path().join("d.csv");
    fs::write(&csv, "f0,label\n1,0\n").unwrap();
    assert!(read_dataset_csv(&csv, None).is_err());
    fs::write(&csv, "f0,true_label,observed_label,noise_flag\n1.5,0,1,0\n").unwrap();
    assert!(read_dataset_csv(&csv, None).is_err(), "flag disagrees with labels");
    assert!(read_model(&csv).is_err());
}

#[test]
fn checkpoints_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.nocm");
    for seed in 0..20 {
        let mut model = Model::init(5, 7, 3, seed).unwrap();
        model.params.b2[1] = f64::MIN_POSITIVE / 3.0;
        model.params.w1[0] = -0.0;
        write_model(&path, &model).unwrap();
        let back = read_model(&path).unwrap();
        for (a, b) in model.params.slices().iter().zip(back.params.slices()) {
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!((back.input_dim(), back.hidden_dim(), back.class_count()), (5, 7, 3));
    }
    let bytes = fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], b"NOCM");
    assert_eq!(bytes.len(), 18 + (7 * 5 + 7 + 3 * 7 + 3) * 8);
}

fn header_of<T: Table>(dir: &std::path::Path, rows: &[T]) -> String {
    let path = dir.join("t.csv");
    write_rows(&path, rows).unwrap();
    fs::read_to_string(&path).unwrap()
}

#[test]
fn result_tables_have_the_documented_headers() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        header_of::<RoundRow>(d, &[]),
        "round,cumulative_relabeled,noise_remaining,macro_f1_test,macro_f1_val,sampler,mode,seed\n"
    );
    assert_eq!(
        header_of::<TrainingRow>(d, &[]),
        "epoch,lr,keep_fraction,mean_loss_A,mean_loss_B,n_vog_selected,clean_precision,clean_recall\n"
    );
    assert_eq!(header_of::<SelectionRow>(d, &[]), "class,recall,guess_pct,n_clean_true,n_selected\n");
    assert_eq!(header_of::<VogRow>(d, &[]), "sample_id,epoch,vog\n");
    assert_eq!(header_of::<CurveRow>(d, &[]), "mode,sampler,round,f1_mean,f1_std\n");
    let row = SelectionRow {
        class: 2,
        recall: None,
        guess_pct: Some(62.5),
        n_clean_true: 0,
        n_selected: 8,
    };
    let text = header_of(d, &[row.clone()]);
    assert!(text.ends_with("\n2,,62.5,0,8\n"));
    assert_eq!(read_rows::<SelectionRow>(&d.join("t.csv")).unwrap(), vec![row]);
    fs::write(d.join("t.csv"), "class,recall\n1,2\n").unwrap();
    assert!(read_rows::<SelectionRow>(&d.join("t.csv")).is_err());
}

proptest! {
    #[test]
    fn nine_digits_recover_any_f32(bits in any::<u32>()) {
        let v = f32::from_bits(bits);
        prop_assume!(v.is_finite());
        let text = format_significant(v as f64, 9);
        prop_assert_eq!(text.parse::<f32>().unwrap().to_bits(), if v == 0.0 { 0 } else { v.to_bits() });
    }

    #[test]
    fn datasets_round_trip_through_both_forms(seed in any::<u64>(), scale in -20i32..20) {
        let dir = tempfile::tempdir().unwrap();
        let data = noisy(seed);
        let factor = 2f64.powi(scale);
        let values: Vec<f64> = data.features().as_slice().iter().map(|v| v * factor).collect();
        let data = LabeledDataset::new(
            Matrix::from_vec(data.len(), 3, values).unwrap(),
            data.true_labels().to_vec(),
            data.observed_labels().to_vec(),
            4,
        ).unwrap();
        let stored = as_stored(&data);
        for name in ["d.csv", "d.nocl"] {
            let path = dir.path().join(name);
            save_dataset(&path, &data).unwrap();
            prop_assert_eq!(&load_dataset(&path, Some(4)).unwrap(), &stored);
        }
    }
}
