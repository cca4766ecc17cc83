#pragma once

// File formats: workloads as JSON Lines (a {"block":h,"n":count} header
// followed by one transaction object per line) and generator specs as JSON
// documents mirroring WorkloadSpec. Writers are canonical so identical
// inputs produce byte-identical files.

#include "chiron/types.hpp"
#include "chiron/workload.hpp"

#include <string>
#include <vector>

namespace chiron {

void write_blocks_jsonl(const std::string& path, const std::vector<Block>& blocks);

// Strict inverse of write_blocks_jsonl; throws std::runtime_error naming the
// line and problem on malformed input. Round-trips exactly.
std::vector<Block> read_blocks_jsonl(const std::string& path);

std::string spec_to_json(const WorkloadSpec& spec);

// Throws std::runtime_error naming the offending field; the result is
// validated with validate_spec before being returned.
WorkloadSpec spec_from_json_text(const std::string& text);

void write_spec_file(const std::string& path, const WorkloadSpec& spec);
WorkloadSpec read_spec_file(const std::string& path);

} // namespace chiron
