#pragma once

#include <optional>
#include <string>
#include <vector>

#include "divrank/config.hpp"
#include "divrank/reencoder.hpp"
#include "divrank/scl.hpp"
#include "divrank/token_classifier.hpp"

namespace divrank {

// Layout: "DRCK", version byte, 3 reserved bytes, u32 header length, u64
// payload length, JSON header, little-endian f64 tensors, u32 CRC32 of all
// preceding bytes.
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    ConfigMap config;
    ReEncoderModel reencoder;
    PrototypeBank bank;
    std::optional<TokenClassifierModel> ttc;  // absent when stage 2 was skipped
    long scl_steps = 0;
    long ttc_steps = 0;
    std::vector<std::string> rng_labels;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<unsigned char>& bytes);

}  // namespace divrank
