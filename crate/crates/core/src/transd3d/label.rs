use crate::constellation::{argmin, Mode, SubblockBits, SubblockSymbols, System, SystemConfig};
use crate::detectors::best_pattern;
use crate::ndiff::{Tensor2D, BCE_CLAMP};

/// `n × (s + 1)` target: a one-hot symbol index in the first `s` columns,
/// and `1` in the last column where the subcarrier uses mode B.
pub fn one_hot(symbols: &SubblockSymbols, config: &SystemConfig) -> Tensor2D {
    let mut t = Tensor2D::zeros(config.n, config.s_a + 1);
    write_one_hot(symbols, config, t.data_mut());
    t
}

pub(crate) fn write_one_hot(symbols: &SubblockSymbols, config: &SystemConfig, out: &mut [f64]) {
    let width = config.s_a + 1;
    out.iter_mut().for_each(|v| *v = 0.0);
    for pos in 0..config.n {
        let row = &mut out[pos * width..(pos + 1) * width];
        row[symbols.symbols[pos]] = 1.0;
        if symbols.modes[pos] == Mode::B {
            row[config.s_a] = 1.0;
        }
    }
}

/// Chosen lookup entry and per-subcarrier symbol index for one `n × (s+1)`
/// output block given as a row-major slice.
pub fn decide(output: &[f64], system: &System) -> (usize, Vec<usize>) {
    let cfg = &system.config;
    let width = cfg.s_a + 1;
    // A pattern scores Σ_{α∉P} ln o_α + Σ_{α∈P} ln(1 − o_α). Subtracting the
    // pattern-independent Σ_α ln o_α leaves Σ_{α∈P} [ln(1 − o_α) − ln o_α].
    let favour_a: Vec<f64> = (0..cfg.n)
        .map(|pos| {
            let o = output[pos * width + cfg.s_a].clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
            (1.0 - o).ln() - o.ln()
        })
        .collect();
    let pattern = best_pattern(system, &favour_a);
    let symbols = (0..cfg.n)
        .map(|pos| {
            let row = &output[pos * width..pos * width + cfg.s_a];
            argmin(row.iter().map(|v| -v)).0
        })
        .collect();
    (pattern, symbols)
}

pub fn decode(output: &Tensor2D, system: &System) -> SubblockBits {
    let (pattern, symbols) = decide(output.data(), system);
    system.bits_of(pattern, &symbols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::SystemConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sys1() -> System {
        System::new(SystemConfig::scenario1()).unwrap()
    }

    fn bits(v: &[u8]) -> Vec<bool> {
        v.iter().map(|&b| b == 1).collect()
    }

    #[test]
    fn table_row_one() {
        let sys = sys1();
        let b = SubblockBits {
            index_bits: bits(&[0, 0]),
            symbol_bits: bits(&[0, 1, 0, 1]),
        };
        let label = one_hot(&sys.symbols_of(&b).unwrap(), &sys.config);
        let expected = Tensor2D::from_rows(&[
            &[1.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0],
            &[1.0, 0.0, 1.0],
            &[0.0, 1.0, 1.0],
        ]);
        assert_eq!(label, expected);
        assert_eq!(decode(&label, &sys), b);
    }

    #[test]
    fn table_row_two() {
        let sys = sys1();
        // [S_B^1, S_A^1, S_A^2, S_B^2]
        let b = SubblockBits {
            index_bits: bits(&[0, 1]),
            symbol_bits: bits(&[0, 1, 0, 1]),
        };
        let label = one_hot(&sys.symbols_of(&b).unwrap(), &sys.config);
        let expected = Tensor2D::from_rows(&[
            &[1.0, 0.0, 1.0],
            &[1.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0],
            &[0.0, 1.0, 1.0],
        ]);
        assert_eq!(label, expected);
    }

    #[test]
    fn one_hot_rows_have_one_symbol() {
        let sys = System::new(SystemConfig::scenario2()).unwrap();
        for v in 0..1024 {
            let b = SubblockBits::from_index(v, &sys.config);
            let label = one_hot(&sys.symbols_of(&b).unwrap(), &sys.config);
            for r in 0..4 {
                assert_eq!(label.row(r)[..4].iter().sum::<f64>(), 1.0);
            }
        }
    }

    #[test]
    fn decode_inverts_one_hot_exhaustive() {
        let sys = sys1();
        for v in 0..64 {
            let b = SubblockBits::from_index(v, &sys.config);
            let label = one_hot(&sys.symbols_of(&b).unwrap(), &sys.config);
            assert_eq!(decode(&label, &sys), b);
        }
    }

    #[test]
    fn decode_inverts_one_hot_random_scenario2() {
        let sys = System::new(SystemConfig::scenario2()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10_000 {
            let b = SubblockBits::random(&mut rng, &sys.config);
            let label = one_hot(&sys.symbols_of(&b).unwrap(), &sys.config);
            assert_eq!(decode(&label, &sys), b);
        }
    }

    #[test]
    fn decode_mode_column() {
        let sys = sys1();
        let mut o = Tensor2D::filled(4, 3, 0.5);
        for (r, v) in [0.1, 0.2, 0.9, 0.8].iter().enumerate() {
            o.set(r, 2, *v);
        }
        let (pattern, _) = decide(o.data(), &sys);
        assert_eq!(sys.lookup.pattern(pattern), &[0, 1]);
    }

    #[test]
    fn decode_uniform_output() {
        let sys = sys1();
        let (pattern, symbols) = decide(Tensor2D::filled(4, 3, 0.5).data(), &sys);
        assert_eq!(pattern, 0);
        assert_eq!(symbols, vec![0; 4]);
    }

    #[test]
    fn decoded_pattern_is_legal() {
        let sys = sys1();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let o = Tensor2D::uniform(&mut rng, 4, 3, 0.5).map(|v| v + 0.5);
            let (pattern, _) = decide(o.data(), &sys);
            assert!(pattern < sys.lookup.len());
        }
    }
}
