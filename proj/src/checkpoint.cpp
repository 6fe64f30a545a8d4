#include "arsp/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "arsp/errors.hpp"
#include "arsp/util.hpp"

namespace arsp {

namespace {

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

} // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw io_error("cannot open for writing: " + path);
    }
    out.write("ARCK", 4);
    put<uint32_t>(out, 1);
    put<uint8_t>(out, ckpt.preset == Preset::full ? 0 : 1);
    put<uint32_t>(out, static_cast<uint32_t>(ckpt.records.size()));
    for (const CheckpointRecord& r : ckpt.records) {
        put<uint32_t>(out, static_cast<uint32_t>(r.name.size()));
        out.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
        put<uint8_t>(out, r.frozen ? 1 : 0);
        put<uint32_t>(out, static_cast<uint32_t>(r.shape.size()));
        size_t numel = 1;
        for (int d : r.shape) {
            put<uint32_t>(out, static_cast<uint32_t>(d));
            numel *= static_cast<size_t>(d);
        }
        if (numel != r.data.size()) {
            throw contract_error("checkpoint record '" + r.name + "' shape/data mismatch");
        }
        out.write(reinterpret_cast<const char*>(r.data.data()),
                  static_cast<std::streamsize>(r.data.size() * sizeof(float)));
    }
    if (!out) {
        throw io_error("write failed: " + path);
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw io_error("cannot open checkpoint: " + path);
    }
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, "ARCK", 4) != 0) {
        throw io_error("bad checkpoint magic: " + path);
    }
    const uint32_t version = get<uint32_t>(in);
    if (version != 1) {
        throw io_error("unsupported checkpoint version: " + path);
    }
    Checkpoint ckpt;
    ckpt.preset = get<uint8_t>(in) == 0 ? Preset::full : Preset::tiny;
    const uint32_t count = get<uint32_t>(in);
    ckpt.records.resize(count);
    for (CheckpointRecord& r : ckpt.records) {
        const uint32_t name_len = get<uint32_t>(in);
        r.name.resize(name_len);
        in.read(r.name.data(), name_len);
        r.frozen = get<uint8_t>(in) != 0;
        const uint32_t rank = get<uint32_t>(in);
        r.shape.resize(rank);
        size_t numel = 1;
        for (uint32_t i = 0; i < rank; ++i) {
            r.shape[i] = static_cast<int>(get<uint32_t>(in));
            numel *= static_cast<size_t>(r.shape[i]);
        }
        r.data.resize(numel);
        in.read(reinterpret_cast<char*>(r.data.data()),
                static_cast<std::streamsize>(numel * sizeof(float)));
        if (!in) {
            throw io_error("truncated checkpoint: " + path);
        }
    }
    return ckpt;
}

CheckpointRecord record_from_tensor(const std::string& name, const Tensor& t, bool frozen) {
    CheckpointRecord r;
    r.name = name;
    r.frozen = frozen;
    r.shape = t.shape();
    r.data.reserve(t.numel());
    for (double v : t.data()) {
        r.data.push_back(static_cast<float>(v));
    }
    return r;
}

Tensor tensor_from_record(const CheckpointRecord& rec, bool requires_grad) {
    std::vector<double> d(rec.data.size());
    for (size_t i = 0; i < d.size(); ++i) {
        d[i] = static_cast<double>(rec.data[i]);
    }
    return Tensor(rec.shape, std::move(d), requires_grad);
}

Checkpoint checkpoint_from_network(const Network& net) {
    Checkpoint ckpt;
    ckpt.preset = net.preset();
    for (const Param& p : net.params()) {
        ckpt.records.push_back(record_from_tensor(p.name, p.value, p.frozen));
    }
    return ckpt;
}

void apply_checkpoint(Network& net, const Checkpoint& ckpt) {
    if (ckpt.preset != net.preset()) {
        throw contract_error("checkpoint preset does not match network preset");
    }
    for (const CheckpointRecord& r : ckpt.records) {
        if (r.name.rfind("__", 0) == 0) {
            continue; // reserved records (optimizer state, counters)
        }
        Param& p = net.param(r.name);
        if (p.value.shape() != r.shape) {
            throw contract_error("checkpoint record '" + r.name + "' shape mismatch");
        }
        const bool rg = p.value.requires_grad();
        p.value = tensor_from_record(r, rg);
        p.frozen = r.frozen;
    }
}

uint64_t checkpoint_hash(const Checkpoint& ckpt) {
    uint64_t h = 1469598103934665603ull;
    const uint8_t preset = ckpt.preset == Preset::full ? 0 : 1;
    h = fnv1a64(&preset, 1, h);
    for (const CheckpointRecord& r : ckpt.records) {
        h = fnv1a64(r.name.data(), r.name.size(), h);
        const uint8_t fz = r.frozen ? 1 : 0;
        h = fnv1a64(&fz, 1, h);
        h = fnv1a64(r.shape.data(), r.shape.size() * sizeof(int), h);
        h = fnv1a64(r.data.data(), r.data.size() * sizeof(float), h);
    }
    return h;
}

uint64_t file_hash(const std::string& path) {
    const std::string bytes = read_text_file(path);
    return fnv1a64(bytes.data(), bytes.size());
}

} // namespace arsp
