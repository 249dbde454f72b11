#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "zkinfer/circuit.hpp"
#include "zkinfer/errors.hpp"
#include "zkinfer/field.hpp"
#include "zkinfer/sha256.hpp"
#include "zkinfer/witness.hpp"

namespace zkinfer {

// Designated-verifier proof artifact: digests bind circuit, public IO, and
// witness; the challenge seed is derived from the digests and selects a small
// set of constraint openings. Not zero-knowledge and not succinct -- the
// verifier holds the witness and rechecks everything. The format keeps the
// interface a succinct backend would need.
struct ProofArtifact {
  static constexpr std::uint8_t kHashSha256 = 1;

  std::uint8_t hash_id = kHashSha256;
  Digest32 circuit_digest{};
  Digest32 io_digest{};
  Digest32 witness_digest{};
  std::array<std::uint8_t, 16> challenge_seed{};

  struct Opening {
    std::uint32_t constraint_index = 0;
    std::uint8_t kind = 0;
    u64 value_a = 0;
    u64 value_b = 0;
  };
  std::vector<Opening> openings;
};

inline constexpr std::size_t kSpotCheckCount = 64;

namespace detail {

inline Digest32 io_digest_of(const std::vector<u64>& inputs, const std::vector<u64>& outputs) {
  Sha256 h;
  h.update("ZKIO", 4);
  std::vector<std::uint8_t> buf;
  wire_format::put_u64(buf, inputs.size());
  for (u64 v : inputs) wire_format::put_u64(buf, v);
  wire_format::put_u64(buf, outputs.size());
  for (u64 v : outputs) wire_format::put_u64(buf, v);
  h.update(buf.data(), buf.size());
  return h.finish();
}

inline Digest32 witness_digest_of(const Witness& w) {
  Sha256 h;
  h.update("ZKWV", 4);
  std::vector<std::uint8_t> buf;
  wire_format::put_u64(buf, w.values.size());
  for (u64 v : w.values) wire_format::put_u64(buf, v);
  h.update(buf.data(), buf.size());
  return h.finish();
}

inline std::array<std::uint8_t, 16> derive_seed(const Digest32& circuit, const Digest32& io,
                                                const Digest32& witness) {
  Sha256 h;
  h.update("ZKSEED", 6);
  h.update(circuit.data(), circuit.size());
  h.update(io.data(), io.size());
  h.update(witness.data(), witness.size());
  Digest32 d = h.finish();
  std::array<std::uint8_t, 16> seed{};
  std::memcpy(seed.data(), d.data(), 16);
  return seed;
}

// Deterministic PRF mapping the seed to spot-check constraint indices.
inline std::uint32_t spot_check_index(const std::array<std::uint8_t, 16>& seed, std::uint64_t i,
                                      std::uint64_t n_constraints) {
  Sha256 h;
  h.update(seed.data(), seed.size());
  h.update("open", 4);
  std::uint8_t le[8];
  for (int b = 0; b < 8; ++b) le[b] = static_cast<std::uint8_t>(i >> (8 * b));
  h.update(le, 8);
  Digest32 d = h.finish();
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= std::uint64_t(d[b]) << (8 * b);
  return static_cast<std::uint32_t>(v % n_constraints);
}

}  // namespace detail

// Refuses to sign a witness that violates the system; otherwise binds all
// artifacts by digest and opens the derived spot-check subset.
inline ProofArtifact prove(const ConstraintSystem& cs, const Witness& w) {
  if (w.values.size() != cs.n_wires)
    fail(ErrorKind::Schema, "witness wire count does not match the circuit");
  CheckReport report = check_constraints(cs, w);
  if (!report.ok())
    fail(ErrorKind::ConstraintViolation, "refusing to prove a violated witness: " + report.summary());

  ProofArtifact pa;
  pa.circuit_digest = circuit_digest(cs);
  pa.io_digest = detail::io_digest_of(w.public_inputs(), w.public_outputs());
  pa.witness_digest = detail::witness_digest_of(w);
  pa.challenge_seed = detail::derive_seed(pa.circuit_digest, pa.io_digest, pa.witness_digest);

  std::size_t n_open = std::min<std::size_t>(kSpotCheckCount, cs.constraints.size());
  for (std::size_t i = 0; i < n_open; ++i) {
    std::uint32_t idx = detail::spot_check_index(pa.challenge_seed, i, cs.constraints.size());
    const Constraint& c = cs.constraints[idx];
    ProofArtifact::Opening o;
    o.constraint_index = idx;
    o.kind = static_cast<std::uint8_t>(c.kind);
    o.value_a = w.values[c.a.index];
    o.value_b = c.kind == ConstraintKind::AssertEqual ? w.values[c.b.index] : 0;
    pa.openings.push_back(o);
  }
  return pa;
}

struct PublicIo {
  std::vector<u64> inputs;
  std::vector<u64> outputs;
};

struct VerifyResult {
  bool accepted = false;
  std::string reason;  // failing clause when rejected
};

inline VerifyResult reject(std::string reason) { return {false, std::move(reason)}; }

// Accepts iff (a) all three digests match recomputation over the presented
// circuit/IO/witness, (b) the challenge seed matches its derivation, (c)
// every opening matches the witness and its constraint holds, and (d) the
// full constraint recheck passes.
inline VerifyResult verify(const ConstraintSystem& cs, const PublicIo& io, const Witness& w,
                           const ProofArtifact& pa) {
  if (pa.hash_id != ProofArtifact::kHashSha256)
    fail(ErrorKind::Schema, "unsupported hash algorithm id in proof");
  if (w.values.size() != cs.n_wires)
    fail(ErrorKind::Schema, "witness wire count does not match the circuit");

  if (circuit_digest(cs) != pa.circuit_digest) return reject("(a) circuit_digest mismatch");
  if (detail::io_digest_of(io.inputs, io.outputs) != pa.io_digest)
    return reject("(a) io_digest mismatch");
  if (detail::witness_digest_of(w) != pa.witness_digest) return reject("(a) witness_digest mismatch");

  if (detail::derive_seed(pa.circuit_digest, pa.io_digest, pa.witness_digest) != pa.challenge_seed)
    return reject("(b) challenge_seed does not match its derivation");

  std::size_t n_open = std::min<std::size_t>(kSpotCheckCount, cs.constraints.size());
  if (pa.openings.size() != n_open) return reject("(c) wrong number of spot-check openings");
  const Field& f = cs.field;
  for (std::size_t i = 0; i < n_open; ++i) {
    const auto& o = pa.openings[i];
    std::uint32_t idx = detail::spot_check_index(pa.challenge_seed, i, cs.constraints.size());
    if (o.constraint_index != idx) return reject("(c) opening " + std::to_string(i) + " has a wrong index");
    const Constraint& c = cs.constraints[idx];
    if (o.kind != static_cast<std::uint8_t>(c.kind))
      return reject("(c) opening " + std::to_string(i) + " has a wrong constraint kind");
    if (o.value_a != w.values[c.a.index])
      return reject("(c) opening " + std::to_string(i) + " disagrees with the witness");
    bool holds = true;
    switch (c.kind) {
      case ConstraintKind::AssertZero: holds = o.value_a == 0; break;
      case ConstraintKind::AssertBool: holds = o.value_a == 0 || o.value_a == 1; break;
      case ConstraintKind::AssertEqual:
        if (o.value_b != w.values[c.b.index])
          return reject("(c) opening " + std::to_string(i) + " disagrees with the witness");
        holds = o.value_a == o.value_b;
        break;
    }
    if (!holds) return reject("(c) opened constraint " + std::to_string(idx) + " does not hold");
    (void)f;
  }

  CheckReport report = check_constraints(cs, w);
  if (!report.ok()) return reject("(d) constraint recheck failed: " + report.summary());
  return {true, "ok"};
}

// ---------------------------------------------------------------------------
// Freivalds randomized matrix-product verification (test oracle role).
// ---------------------------------------------------------------------------

struct IntMatrix {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<i64> data;  // row-major

  i64 at(std::int64_t i, std::int64_t j) const { return data[i * cols + j]; }
};

struct FreivaldsParams {
  std::uint32_t repetitions = 2;
  u64 seed = 0;
};

// One challenge: accept iff A*(B*v) == C*v over the field.
inline bool freivalds_round(const IntMatrix& a, const IntMatrix& b, const IntMatrix& c,
                            const Field& f, const std::vector<FieldElement>& v) {
  std::vector<FieldElement> bv(b.rows, f.zero());
  for (std::int64_t i = 0; i < b.rows; ++i) {
    FieldElement acc = f.zero();
    for (std::int64_t j = 0; j < b.cols; ++j)
      acc = f.add(acc, f.mul(f.encode_signed(b.at(i, j)), v[j]));
    bv[i] = acc;
  }
  for (std::int64_t i = 0; i < a.rows; ++i) {
    FieldElement abv = f.zero();
    for (std::int64_t j = 0; j < a.cols; ++j)
      abv = f.add(abv, f.mul(f.encode_signed(a.at(i, j)), bv[j]));
    FieldElement cv = f.zero();
    for (std::int64_t j = 0; j < c.cols; ++j)
      cv = f.add(cv, f.mul(f.encode_signed(c.at(i, j)), v[j]));
    if (abv != cv) return false;
  }
  return true;
}

// Accepts C = A*B always; rejects a wrong C with probability >= 1 - (1/p)^t
// over the challenge randomness.
inline bool freivalds_check(const IntMatrix& a, const IntMatrix& b, const IntMatrix& c,
                            const Field& f, const FreivaldsParams& params) {
  if (params.repetitions < 1) fail(ErrorKind::Config, "freivalds repetitions must be >= 1");
  if (a.cols != b.rows || a.rows != c.rows || b.cols != c.cols)
    fail(ErrorKind::ShapeMismatch, "freivalds: matrix shapes are not conformable");

  std::mt19937_64 rng(params.seed);
  const u64 p = f.modulus();
  const u64 limit = p * (~u64{0} / p);  // rejection bound for unbiased residues
  auto draw = [&]() {
    u64 x = rng();
    while (x >= limit) x = rng();
    return x % p;
  };
  for (std::uint32_t t = 0; t < params.repetitions; ++t) {
    std::vector<FieldElement> v(b.cols);
    for (auto& e : v) e = {draw()};
    if (!freivalds_round(a, b, c, f, v)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Proof artifact byte format ("proof.bin" role): header + length-prefixed
// sections, little-endian.
// ---------------------------------------------------------------------------

inline constexpr char kProofMagic[8] = {'Z', 'K', 'P', 'R', 'O', 'O', 'F', '1'};
inline constexpr std::uint32_t kProofFormatVersion = 1;

inline std::vector<std::uint8_t> serialize_proof(const ProofArtifact& pa) {
  using namespace wire_format;
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kProofMagic, kProofMagic + 8);
  put_u32(out, kProofFormatVersion);
  put_u8(out, pa.hash_id);

  put_u64(out, 96);  // digest section
  out.insert(out.end(), pa.circuit_digest.begin(), pa.circuit_digest.end());
  out.insert(out.end(), pa.io_digest.begin(), pa.io_digest.end());
  out.insert(out.end(), pa.witness_digest.begin(), pa.witness_digest.end());

  put_u64(out, pa.challenge_seed.size());
  out.insert(out.end(), pa.challenge_seed.begin(), pa.challenge_seed.end());

  put_u64(out, 4 + pa.openings.size() * 21);  // opening section
  put_u32(out, static_cast<std::uint32_t>(pa.openings.size()));
  for (const auto& o : pa.openings) {
    put_u32(out, o.constraint_index);
    put_u8(out, o.kind);
    put_u64(out, o.value_a);
    put_u64(out, o.value_b);
  }
  return out;
}

inline ProofArtifact deserialize_proof(const std::vector<std::uint8_t>& bytes) {
  using namespace wire_format;
  Reader r(bytes);
  char magic[8];
  r.bytes(reinterpret_cast<std::uint8_t*>(magic), 8);
  if (std::memcmp(magic, kProofMagic, 8) != 0) fail(ErrorKind::Schema, "not a proof file (bad magic)");
  if (r.u32() != kProofFormatVersion) fail(ErrorKind::Schema, "unsupported proof format version");

  ProofArtifact pa;
  pa.hash_id = r.u8();
  if (r.u64v() != 96) fail(ErrorKind::Schema, "unexpected digest section length");
  r.bytes(pa.circuit_digest.data(), 32);
  r.bytes(pa.io_digest.data(), 32);
  r.bytes(pa.witness_digest.data(), 32);
  if (r.u64v() != pa.challenge_seed.size()) fail(ErrorKind::Schema, "unexpected seed section length");
  r.bytes(pa.challenge_seed.data(), pa.challenge_seed.size());
  u64 section = r.u64v();
  std::uint32_t count = r.u32();
  if (section != 4 + u64{count} * 21) fail(ErrorKind::Schema, "unexpected opening section length");
  for (std::uint32_t i = 0; i < count; ++i) {
    ProofArtifact::Opening o;
    o.constraint_index = r.u32();
    o.kind = r.u8();
    o.value_a = r.u64v();
    o.value_b = r.u64v();
    pa.openings.push_back(o);
  }
  if (!r.at_end()) fail(ErrorKind::Schema, "trailing bytes after proof");
  return pa;
}

}  // namespace zkinfer
