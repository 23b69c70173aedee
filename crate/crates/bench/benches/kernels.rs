//! Microbenchmarks for the kernels that dominate simulation time: the
//! bit-plane emulation paths, the lookup-table GEMV, the slice hasher,
//! and the whole-model roll-up.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use lutsim_core::arch::hasher::{hash_address, HasherConfig};
use lutsim_core::arch::isa::{LutmmInstruction, QL_LEVELS};
use lutsim_core::bitplane::BitPlaneArray;
use lutsim_core::lutgemv::{gemv_tile, GemvJob, LutTable};
use lutsim_core::pipeline::{run, ModelSpec, PipelineConfig};
use lutsim_core::prt::PatternReuseTable;
use lutsim_core::typeconv::{int_to_float_inmem, twos_complement_to_sm};

fn gemv_job(k: usize, n: usize, batch: usize, nbw: u32, bits: u32) -> GemvJob {
    let mut rng = StdRng::seed_from_u64(42);
    let qmax = (1i32 << (bits - 1)) - 1;
    GemvJob {
        batch,
        k,
        n,
        nbw,
        weight_bits: bits,
        act_bits: 8,
        array_rows: 256,
        activations: (0..batch * k).map(|_| rng.random_range(0..=255)).collect(),
        weights: (0..k * n).map(|_| rng.random_range(-qmax..=qmax)).collect(),
    }
}

fn bench_bit_serial(c: &mut Criterion) {
    let mut rng = StdRng::seed_from_u64(7);
    let a: Vec<u64> = (0..512).map(|_| rng.random::<u64>() & 0xFFFF).collect();
    let b: Vec<u64> = (0..512).map(|_| rng.random::<u64>() & 0xFFFF).collect();
    c.bench_function("bitserial_mult_16bit_512cols", |bench| {
        bench.iter(|| {
            let mut arr = BitPlaneArray::with_default_geometry();
            arr.transpose_in(&a, 16, 0, 0).unwrap();
            arr.transpose_in(&b, 16, 40, 0).unwrap();
            arr.bitserial_mult(0, 40, 120, 16).unwrap();
            black_box(arr.cycles())
        })
    });
}

fn bench_type_convert(c: &mut Criterion) {
    let mut rng = StdRng::seed_from_u64(9);
    let n = 25;
    let vals: Vec<u64> = (0..512)
        .map(|_| rng.random::<u64>() & ((1 << n) - 1))
        .collect();
    c.bench_function("int_to_float_25bit_512cols", |bench| {
        bench.iter(|| {
            let mut arr = BitPlaneArray::with_default_geometry();
            arr.transpose_in(&vals, n, 0, 0).unwrap();
            twos_complement_to_sm(&mut arr, 0, n).unwrap();
            int_to_float_inmem(&mut arr, 0, n, 64).unwrap();
            black_box(arr.cycles())
        })
    });
}

fn bench_lut_build(c: &mut Criterion) {
    c.bench_function("lut_build_nbw4_8bit", |bench| {
        bench.iter(|| LutTable::build(black_box(&[3, -5, 7, -2]), 8, 256).unwrap())
    });
}

fn bench_gemv_tile(c: &mut Criterion) {
    let job = gemv_job(64, 64, 8, 4, 4);
    c.bench_function("gemv_tile_64x64_b8_nbw4", |bench| {
        bench.iter(|| gemv_tile(black_box(&job), None).unwrap())
    });
    c.bench_function("gemv_tile_64x64_b8_nbw4_reuse", |bench| {
        bench.iter(|| {
            let mut prt = PatternReuseTable::new();
            gemv_tile(black_box(&job), Some(&mut prt)).unwrap()
        })
    });
}

fn bench_hasher(c: &mut Criterion) {
    let cfg = HasherConfig::default();
    c.bench_function("hash_address_4k_blocks", |bench| {
        bench.iter(|| {
            let mut acc = 0u32;
            for block in 0..4096u64 {
                acc ^= hash_address(black_box(block << 9), &cfg);
            }
            acc
        })
    });
}

fn bench_isa(c: &mut Criterion) {
    let mut rng = StdRng::seed_from_u64(11);
    let instrs: Vec<LutmmInstruction> = (0..1024)
        .map(|_| {
            let sc = rng.random_range(0..8u8);
            LutmmInstruction {
                rd: rng.random_range(0..32),
                ql: QL_LEVELS[rng.random_range(0..QL_LEVELS.len())],
                rw: rng.random_range(0..32),
                ri: rng.random_range(0..32),
                sc,
                loc: rng.random_range(0..(1u32 << sc).min(16)) as u8,
            }
        })
        .collect();
    c.bench_function("isa_round_trip_1k", |bench| {
        bench.iter(|| {
            let mut acc = 0u32;
            for i in &instrs {
                let word = i.encode().unwrap();
                acc ^= LutmmInstruction::decode(word).unwrap().encode().unwrap();
            }
            acc
        })
    });
}

fn bench_model_run(c: &mut Criterion) {
    let toy = ModelSpec::toy();
    let cfg = PipelineConfig {
        nbw: 2,
        weight_bits: 4,
        batch: 8,
        ..PipelineConfig::default()
    };
    c.bench_function("model_run_toy_b8", |bench| {
        bench.iter(|| run(black_box(&toy), black_box(&cfg)).unwrap())
    });
    let with_reuse = PipelineConfig { prt: true, ..cfg.clone() };
    c.bench_function("model_run_toy_b8_reuse", |bench| {
        bench.iter(|| run(black_box(&toy), black_box(&with_reuse)).unwrap())
    });
}

criterion_group!(
    kernels,
    bench_bit_serial,
    bench_type_convert,
    bench_lut_build,
    bench_gemv_tile,
    bench_hasher,
    bench_isa,
    bench_model_run
);
criterion_main!(kernels);
