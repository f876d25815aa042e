#include <gtest/gtest.h>

#include "edgeprune/error.hpp"
#include "edgeprune/serialize.hpp"
#include "edgeprune/zoo.hpp"
#include "oracle.hpp"

using namespace edgeprune;

TEST(Serialize, RoundTripIsExact) {
  const ModelState m = init_model(build_vgg_like(vgg_mini_config({3, 16, 16}, 10)), 77);
  const auto bytes = serialize_model(m);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 7), "EPMODEL");
  EXPECT_EQ(deserialize_model(bytes), m);

  oracle::TempDir tmp;
  save_model(m, tmp.path() / "m.bin");
  EXPECT_EQ(load_model(tmp.path() / "m.bin"), m);
}

TEST(Serialize, RejectsDamage) {
  const ModelState m = init_model(build_vgg_like(vgg_mini_config({3, 8, 8}, 4)), 1);
  auto bytes = serialize_model(m);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize_model(bad_magic), IngestionError);

  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  EXPECT_THROW(deserialize_model(truncated), IngestionError);

  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(deserialize_model(trailing), IngestionError);

  auto bad_version = bytes;
  bad_version[8] = 99;
  EXPECT_THROW(deserialize_model(bad_version), IngestionError);

  EXPECT_THROW(load_model("/nonexistent/edgeprune/model.bin"), IngestionError);
}
