#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "emguard/monitor.hpp"
#include "emguard/transmitter.hpp"
#include "oracles.hpp"

using namespace emguard;

namespace {

TransmitterConfig basic_config(const BitString& frame, double period, double rate) {
    TransmitterConfig cfg;
    cfg.frame = frame;
    cfg.modulation.bit_period = period;
    cfg.modulation.sample_rate = rate;
    cfg.modulation.amplitude_on = 10.0;
    cfg.modulation.amplitude_off = 1.0;
    return cfg;
}

}  // namespace

TEST(Modulate, PreambleAtTenMillisecondsAndOneKilohertz) {
    const auto t = modulate(basic_config(BitString{1, 0, 1, 0}, 0.010, 1000.0), 1);
    ASSERT_EQ(t.size(), 40u);
    for (std::size_t i = 0; i < 40; ++i) {
        const bool on = (i / 10) % 2 == 0;
        EXPECT_EQ(t.samples()[i].amplitude, on ? 10.0 : 1.0) << i;
        EXPECT_EQ(t.samples()[i].frequency, 850e6);
        EXPECT_EQ(t.samples()[i].time, static_cast<double>(i) / 1000.0);
    }
}

TEST(Modulate, NoiselessAmplitudesAreOnOrOff) {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 30; ++i) {
        auto cfg = basic_config(build_frame(oracle::random_bits(rng, 1 + i)), 0.001 * (2 + i % 7),
                                2000.0 + 500.0 * (i % 3));
        cfg.repeat_count = 1 + i % 3;
        cfg.lead_silence = 0.0013 * (i % 4);
        for (const auto& s : modulate(cfg, i).samples())
            ASSERT_TRUE(s.amplitude == 10.0 || s.amplitude == 1.0);
    }
}

TEST(Modulate, DeterministicPerSeed) {
    auto cfg = basic_config(build_frame(encode_payload("key")), 0.004, 5000.0);
    cfg.modulation.noise_sigma = 0.7;
    const auto a = modulate(cfg, 42);
    const auto b = modulate(cfg, 42);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, modulate(cfg, 43));
    for (const auto& s : a.samples()) ASSERT_GE(s.amplitude, 0.0);
}

TEST(Modulate, SampleCountLawAndNoiselessSeparability) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> period(0.001, 0.05);
    std::uniform_real_distribution<double> lead(0.0, 0.1);
    std::uniform_real_distribution<double> rate(2000.0, 12000.0);
    for (int i = 0; i < 200; ++i) {
        auto cfg = basic_config(build_frame(oracle::random_bits(rng, 1 + i % 20)), period(rng), rate(rng));
        cfg.repeat_count = 1 + i % 4;
        cfg.lead_silence = i % 2 ? lead(rng) : 0.0;
        if (cfg.modulation.bit_period * cfg.modulation.sample_rate < 2.0) continue;
        const auto t = modulate(cfg, i);
        const double fs = cfg.modulation.sample_rate;
        const auto expected = std::llround(
            (cfg.lead_silence + static_cast<double>(cfg.repeat_count * cfg.frame.size()) *
                                    cfg.modulation.bit_period) * fs);
        ASSERT_EQ(static_cast<long long>(t.size()), expected);

        // per-bit window mean equals the keyed level exactly
        for (std::size_t k = 0; k < cfg.repeat_count * cfg.frame.size(); ++k) {
            const auto lo = oracle::nearest_sample(cfg.lead_silence + k * cfg.modulation.bit_period, fs);
            const auto hi = oracle::nearest_sample(cfg.lead_silence + (k + 1) * cfg.modulation.bit_period, fs);
            const double level = cfg.frame[k % cfg.frame.size()] ? 10.0 : 1.0;
            for (auto j = lo; j < hi; ++j) ASSERT_EQ(t.samples()[j].amplitude, level);
        }
    }
}

TEST(Modulate, LeadSilenceIsOffAmplitude) {
    auto cfg = basic_config(BitString{1}, 0.01, 1000.0);
    cfg.lead_silence = 0.02;
    const auto t = modulate(cfg, 0);
    ASSERT_EQ(t.size(), 30u);
    for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(t.samples()[i].amplitude, 1.0);
    for (std::size_t i = 20; i < 30; ++i) EXPECT_EQ(t.samples()[i].amplitude, 10.0);
}

TEST(Modulate, InvalidConfig) {
    auto cfg = basic_config(BitString{1, 0}, 0.001, 1000.0);  // one sample per bit
    EXPECT_THROW(modulate(cfg, 0), InvalidConfig);
    cfg = basic_config(BitString{1, 0}, 0.01, 1000.0);
    cfg.modulation.amplitude_off = 10.0;
    EXPECT_THROW(modulate(cfg, 0), InvalidConfig);
    cfg = basic_config(BitString{1, 0}, 0.01, 1000.0);
    cfg.repeat_count = 0;
    EXPECT_THROW(modulate(cfg, 0), InvalidConfig);
    cfg = basic_config(BitString{1, 0}, 0.01, 1000.0);
    cfg.lead_silence = -1.0;
    EXPECT_THROW(modulate(cfg, 0), InvalidConfig);
    cfg = basic_config(BitString{1, 0}, 0.01, 1000.0);
    cfg.modulation.noise_sigma = -0.1;
    EXPECT_THROW(modulate(cfg, 0), InvalidConfig);
}

TEST(NormalTrace, BelowThresholdAndSized) {
    const AnomalyBand band{849e6, 851e6, 4.0};
    const auto t = generate_normal_trace(band, 1.0, 1000.0, 17);
    ASSERT_EQ(t.size(), 1000u);
    bool some_in_band = false;
    for (const auto& s : t.samples()) {
        ASSERT_LT(s.amplitude, band.amplitude_threshold);
        ASSERT_LT(s.amplitude, 0.8 * band.amplitude_threshold);
        some_in_band = some_in_band || band.contains_frequency(s.frequency);
    }
    EXPECT_TRUE(some_in_band);
    EXPECT_EQ(t, generate_normal_trace(band, 1.0, 1000.0, 17));
}

TEST(NormalTrace, ClassifierFindsNothingAnomalous) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const AnomalyBand band{800e6 + seed * 1e6, 900e6, 0.5 + static_cast<double>(seed)};
        const auto t = generate_normal_trace(band, 0.5, 4000.0, seed);
        EXPECT_EQ(count_anomalous(t, band), 0u);
        EXPECT_EQ(classify_trace(t, band), EmissionClass::normal);
    }
}

TEST(NormalTrace, InvalidDuration) {
    const AnomalyBand band{849e6, 851e6, 4.0};
    EXPECT_THROW(generate_normal_trace(band, 0.0, 1000.0, 1), InvalidDuration);
    EXPECT_THROW(generate_normal_trace(band, -2.0, 1000.0, 1), InvalidDuration);
}

TEST(InstructionRecords, SingleTransmitter) {
    const auto cfg = basic_config(build_frame(encode_payload("A")), 0.01, 2000.0);
    const auto recs = emit_instruction_records(cfg, 0, 3);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].thread_id, cfg.thread_id);
    // 1010 + 01000001 has four 1-bits, one 4 KiB sweep of 16-byte stores each
    EXPECT_EQ(recs[0].movntdq_calls, 4u * 256u);
    EXPECT_LE(recs[0].movntdq_calls, recs[0].total_instructions);
}

TEST(InstructionRecords, AllZeroFrameIssuesNoStores) {
    const auto cfg = basic_config(BitString{0, 0, 0, 0, 0}, 0.01, 2000.0);
    const auto recs = emit_instruction_records(cfg, 0, 3);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].movntdq_calls, 0u);
}

TEST(InstructionRecords, BenignThreadsUniqueIds) {
    auto cfg = basic_config(build_frame(encode_payload("pw")), 0.01, 2000.0);
    cfg.repeat_count = 3;
    const auto recs = emit_instruction_records(cfg, 5, 99);
    ASSERT_EQ(recs.size(), 6u);
    std::set<std::string> ids;
    int transmitters = 0;
    for (const auto& r : recs) {
        ids.insert(r.thread_id);
        if (r.thread_id == cfg.thread_id) {
            ++transmitters;
            EXPECT_EQ(r.movntdq_calls, 3 * cfg.frame.count_ones() * 256);
        } else {
            EXPECT_EQ(r.movntdq_calls, 0u);
        }
        EXPECT_DOUBLE_EQ(r.window, cfg.transmission_duration());
    }
    EXPECT_EQ(ids.size(), 6u);
    EXPECT_EQ(transmitters, 1);
    EXPECT_EQ(recs, emit_instruction_records(cfg, 5, 99));
}

TEST(InstructionRecords, LegitimateMovntdqThreads) {
    auto cfg = basic_config(build_frame(encode_payload("x")), 0.01, 2000.0);
    cfg.legitimate_movntdq_threads = 2;
    const auto recs = emit_instruction_records(cfg, 3, 4);
    ASSERT_EQ(recs.size(), 6u);
    const auto users = std::count_if(recs.begin(), recs.end(),
                                     [](const auto& r) { return r.movntdq_calls > 0; });
    EXPECT_EQ(users, 3);
}

TEST(InstructionRecords, CsvRoundTrip) {
    auto cfg = basic_config(build_frame(encode_payload("abc")), 0.01, 2000.0);
    const auto recs = emit_instruction_records(cfg, 4, 5);
    const auto text = format_records(recs);
    EXPECT_TRUE(text.starts_with("thread_id,movntdq_calls,window_s,total_instructions\n"));
    EXPECT_EQ(parse_records(text), recs);
    EXPECT_THROW(parse_records("t,5,1.0,2\n"), ParseError);  // calls > total
    EXPECT_THROW(parse_records("t,5,1.0\n"), ParseError);
    EXPECT_THROW(parse_records("t,1,0,2\n"), ParseError);
}

TEST(BackgroundRecords, NoMovntdq) {
    const auto recs = emit_background_records(7, 2.0, 1);
    ASSERT_EQ(recs.size(), 7u);
    for (const auto& r : recs) EXPECT_EQ(r.movntdq_calls, 0u);
}
