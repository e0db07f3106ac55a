// Copyright (c) 2026 didgen authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "didgen/record.hpp"

using namespace didgen;

TEST_CASE("record round-trips HCN byte-for-byte") {
  auto rec = to_record(make_hcn(), {{"gap", 2.5}, {"logp", -0.393}});
  const std::string line = serialize(rec);
  auto back = parse_record(line);
  CHECK(back == rec);
  CHECK(serialize(back) == line);

  auto mol = to_graph(back, 5);
  CHECK(validate(mol).ok);
  CHECK(mol.element(0) == Element::H);
  CHECK(mol.bond(1, 2) == 3);
}

TEST_CASE("parse reports bond index out of range") {
  CHECK_THROWS_AS(
      parse_record(R"({"elements":["H","H"],"bonds":[[0,5,1]],"properties":{}})"),
      ParseError);
  CHECK_THROWS_AS(
      parse_record(R"({"elements":["H","H"],"bonds":[[1,0,1]],"properties":{}})"),
      ParseError);
}

TEST_CASE("parse reports line and column on malformed text") {
  try {
    parse_record("{\"elements\": [", 7);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 7") != std::string::npos);
    CHECK(msg.find("column") != std::string::npos);
  }
}

TEST_CASE("parse rejects unknown elements and bad orders") {
  CHECK_THROWS_AS(
      parse_record(R"({"elements":["Xe"],"bonds":[],"properties":{}})"),
      ParseError);
  CHECK_THROWS_AS(
      parse_record(R"({"elements":["H","H"],"bonds":[[0,1,9]],"properties":{}})"),
      ParseError);
}

TEST_CASE("records decode-validate: inconsistent valence rejected") {
  // H with two bonds
  CHECK_THROWS_AS(
      to_graph(parse_record(
                   R"({"elements":["H","H","H"],"bonds":[[0,1,1],[0,2,1]]})"),
               4),
      ParseError);
}

TEST_CASE("property map survives 12-significant-digit round trips") {
  Rng rng(77);
  SamplerConfig cfg;
  cfg.n_atoms_max = 10;
  for (int t = 0; t < 200; ++t) {
    auto mol = random_molecule(rng, 10, cfg);
    std::map<std::string, double> props{
        {"a", rng.normal() * std::pow(10.0, rng.uniform_int(-6, 6))},
        {"b", -rng.uniform()},
    };
    auto rec = to_record(mol, props);
    const std::string once = serialize(rec);
    const std::string twice = serialize(parse_record(once));
    REQUIRE(once == twice);
  }
}

TEST_CASE("dataset files: write, read, reread identical") {
  Rng rng(3);
  SamplerConfig cfg;
  cfg.n_atoms_max = 9;
  std::vector<MoleculeRecord> records;
  for (int i = 0; i < 20; ++i) {
    records.push_back(
        to_record(random_molecule(rng, 9, cfg), {{"x", rng.normal()}}));
  }
  const auto path = std::filesystem::temp_directory_path() / "didgen_ds.jsonl";
  write_dataset(path.string(), records);
  auto loaded = read_dataset(path.string());
  CHECK(loaded == records);
  std::filesystem::remove(path);
}

TEST_CASE("to_record compacts NoAtom slots") {
  auto mol = make_hcn(6);  // three trailing NoAtom slots
  auto rec = to_record(mol);
  CHECK(rec.elements.size() == 3);
  CHECK(rec.bonds.size() == 2);
  auto back = to_graph(rec, 6);
  CHECK(back == mol);
}
