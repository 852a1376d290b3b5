use proptest::prelude::*;

use pcvae::data_io::{decode_ppm, encode_ppm, load_wav, synth_dataset, write_wav};
use pcvae::decoder::{decode_audio, decode_visual, init_decoder, DecoderConfig};
use pcvae::encoder::{batch_sigma, build_bank, encode_batch, EncoderBanks, SigmaPolicy};
use pcvae::infotheory::{cond_mutual_info, mutual_info, pid_decompose, JointDistribution, Variable};
use pcvae::numerics::{gaussian_matrix, Rng, Tensor};
use pcvae::tokenizer::{AudioClip, ImageTensor, Modality};
use pcvae::training::{checkpoint_bytes, checkpoint_from_bytes, train, IiBackend, InputMode, LossConfig, ModelSpec, TrainConfig};

fn joint_strategy() -> impl Strategy<Value = JointDistribution> {
    (1usize..=4, 1usize..=4, 1usize..=4)
        .prop_flat_map(|(a, b, c)| {
            let n = a * b * c;
            (Just([a, b, c]), proptest::collection::vec(prop_oneof![1 => Just(0.0), 3 => 0.0f64..1.0], n))
        })
        .prop_filter_map("all-zero mass", |(cards, mut pmf)| {
            let total: f64 = pmf.iter().sum();
            if total <= 0.0 {
                return None;
            }
            pmf.iter_mut().for_each(|p| *p /= total);
            JointDistribution::new(cards, pmf).ok()
        })
}

fn small_image(h: usize, w: usize, seed: u64) -> ImageTensor {
    let mut rng = Rng::new(seed);
    ImageTensor::new(h, w, (0..3 * h * w).map(|_| rng.uniform()).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pid_parts_add_up(j in joint_strategy()) {
        use Variable::*;
        prop_assert!((j.pmf().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(j.pmf().iter().all(|&p| p >= 0.0));
        let r = pid_decompose(&j).unwrap();
        prop_assert!((r.total - (r.unique1 + r.unique2 + r.redundancy + r.synergy)).abs() < 1e-9);
        // the interaction information has a symmetric conditional form
        let sym = cond_mutual_info(&j, &[X1], &[X2], &[Y]).unwrap() - mutual_info(&j, &[X1], &[X2]).unwrap();
        prop_assert!((r.interaction - sym).abs() < 1e-9, "{} vs {}", r.interaction, sym);
        prop_assert!(r.unique1 >= -1e-12 && r.unique2 >= -1e-12 && r.redundancy >= -1e-12);
    }

    #[test]
    fn gaussian_matrices_repeat_per_seed(rows in 1usize..20, cols in 1usize..20, seed in any::<u64>()) {
        let a = gaussian_matrix(rows, cols, &mut Rng::new(seed)).unwrap();
        let b = gaussian_matrix(rows, cols, &mut Rng::new(seed)).unwrap();
        prop_assert_eq!(a.shape(), &[rows, cols][..]);
        prop_assert_eq!(a.len(), rows * cols);
        prop_assert!(a.is_finite());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn tensor_length_matches_shape(shape in proptest::collection::vec(1usize..5, 1..4)) {
        let n: usize = shape.iter().product();
        prop_assert!(Tensor::new(shape.clone(), vec![0.0; n]).is_ok());
        prop_assert!(Tensor::new(shape.clone(), vec![0.0; n + 1]).is_err());
        let mut zero = shape.clone();
        zero[0] = 0;
        prop_assert!(Tensor::new(zero, vec![]).is_err());
    }

    #[test]
    fn decoder_presets_emit_their_declared_shape(latent in 2usize..32, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let banks = EncoderBanks { visual: None, audio: Some(build_bank(Modality::Audio, 32, latent, 2, seed).unwrap()) };
        let clip = AudioClip::new(vec![0.1; 64], 128).unwrap();
        let z = encode_batch(None, Some(&[clip]), &banks, SigmaPolicy::Batch, &mut rng).unwrap().remove(0);
        let visual = DecoderConfig::preset("desk-visual", latent).unwrap();
        let audio = DecoderConfig::preset("desk-audio", latent).unwrap();
        let trace = visual.validate().unwrap();
        prop_assert_eq!(trace.last(), Some(&(3, 8, 8)));
        let img = decode_visual(&z, &visual, &init_decoder(&visual, &mut rng).unwrap()).unwrap();
        prop_assert_eq!(img.shape(), &[3, 8, 8][..]);
        let wave = decode_audio(&z, &audio, &init_decoder(&audio, &mut rng).unwrap()).unwrap();
        prop_assert_eq!(wave.len(), 64);
    }

    #[test]
    fn latents_concatenate_visual_then_audio(n in 1usize..6, vc in 2usize..12, ac in 2usize..12, seed in any::<u64>()) {
        let data = synth_dataset(n, 8, 8, 64, seed).unwrap();
        let banks = EncoderBanks {
            visual: Some(build_bank(Modality::Visual, 64, vc, 3, seed).unwrap()),
            audio: Some(build_bank(Modality::Audio, 32, ac, 2, seed ^ 1).unwrap()),
        };
        let images: Vec<ImageTensor> = data.iter().map(|s| s.image.clone()).collect();
        let clips: Vec<AudioClip> = data.iter().map(|s| s.audio.clone()).collect();
        let noisy = encode_batch(Some(&images), Some(&clips), &banks, SigmaPolicy::Batch, &mut Rng::new(seed)).unwrap();
        let exact = encode_batch(Some(&images), Some(&clips), &banks, SigmaPolicy::Fixed { visual: 0.0, audio: 0.0 }, &mut Rng::new(seed)).unwrap();
        for (i, (z, mu)) in noisy.iter().zip(&exact).enumerate() {
            prop_assert_eq!(z.total_len(), vc + ac);
            prop_assert_eq!(z.parts()[0].0, Modality::Visual);
            prop_assert_eq!(z.parts()[1].0, Modality::Audio);
            let v = banks.visual.as_ref().unwrap().encode_image(&images[i]).unwrap();
            let a = banks.audio.as_ref().unwrap().encode_audio(&clips[i]).unwrap();
            prop_assert_eq!(mu.values(), [v, a].concat());
        }
        let mus: Vec<Vec<f64>> = exact.iter().map(|z| z.parts()[0].1.clone()).collect();
        prop_assert!(batch_sigma(&mus).unwrap() >= 0.0);
    }

    #[test]
    fn clamped_outputs_stay_in_range(values in proptest::collection::vec(-1e3f64..1e3, 12)) {
        let img = ImageTensor::from_unclamped(2, 2, &values).unwrap();
        prop_assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
        let clip = AudioClip::from_unclamped(&values, 100).unwrap();
        prop_assert!(clip.samples().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn ppm_roundtrip_is_within_half_a_level(h in 1usize..6, w in 1usize..6, seed in any::<u64>()) {
        let img = small_image(h, w, seed);
        let back = decode_ppm(&encode_ppm(&img)).unwrap();
        prop_assert_eq!((back.height(), back.width()), (h, w));
        for (a, b) in img.data().iter().zip(back.data()) {
            prop_assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn wav_roundtrip_is_within_half_a_level(samples in proptest::collection::vec(-1.0f64..1.0, 1..200), rate in 1000u32..48000) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let clip = AudioClip::new(samples, rate).unwrap();
        write_wav(&clip, &path).unwrap();
        let back = load_wav(&path).unwrap();
        prop_assert_eq!(back.sample_rate(), rate);
        prop_assert_eq!(back.len(), clip.len());
        for (a, b) in clip.samples().iter().zip(back.samples()) {
            prop_assert!((a - b).abs() <= 0.5 / 32768.0 + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn checkpoints_roundtrip_trained_models(seed in 1u64..1000, mode in 0usize..3, gaussian in any::<bool>()) {
        let mode = [InputMode::Joint, InputMode::AudioOnly, InputMode::VisualOnly][mode];
        let data = synth_dataset(30, 8, 8, 64, seed).unwrap();
        let spec = ModelSpec::preset("desk", mode, None, seed).unwrap();
        let loss = LossConfig { ii_backend: if gaussian { IiBackend::Gaussian } else { IiBackend::Off }, ..LossConfig::default() };
        let cfg = TrainConfig { epochs: 1, batch_size: 30, seed, ..TrainConfig::default() };
        let (state, history) = train(&data, spec, cfg, loss).unwrap();
        prop_assert_eq!(history.len(), 1);
        let bytes = checkpoint_bytes(&state);
        let back = checkpoint_from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &state);
        prop_assert_eq!(checkpoint_bytes(&back), bytes);
    }
}
