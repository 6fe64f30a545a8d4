#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "arsp/network.hpp"

namespace arsp {

// One named parameter record. Data is stored as f32; models trained in f32
// scalar mode round-trip losslessly.
struct CheckpointRecord {
    std::string name;
    bool frozen = false;
    std::vector<int> shape;
    std::vector<float> data;
};

struct Checkpoint {
    Preset preset = Preset::tiny;
    std::vector<CheckpointRecord> records;
};

// Binary layout: magic "ARCK", u32 version, u8 preset tag, u32 record count,
// then per record: u32 name length + bytes, u8 frozen, u32 rank, rank x u32
// dims, numel x f32 little-endian.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

CheckpointRecord record_from_tensor(const std::string& name, const Tensor& t, bool frozen);
Tensor tensor_from_record(const CheckpointRecord& rec, bool requires_grad);

// Snapshot of every network parameter, in declaration order.
Checkpoint checkpoint_from_network(const Network& net);
// Writes matching records back into the network (by name; shapes must
// agree). Records with reserved "__" prefixes are skipped.
void apply_checkpoint(Network& net, const Checkpoint& ckpt);

// Order-sensitive hash over the canonical record bytes.
uint64_t checkpoint_hash(const Checkpoint& ckpt);
uint64_t file_hash(const std::string& path);

} // namespace arsp
