#include "twofe/tprf.hpp"

namespace twofe {

PrfInput PrfInput::from(ByteView tag, ByteView seed) {
  ByteWriter w;
  w.raw(to_bytes(domain::kdf_input)).field(tag).field(seed);
  PrfInput x;
  x.bytes_ = w.take();
  return x;
}

void DerivedKey::mark_sealed() {
  if (sealed_) throw Error(ErrorCode::internal, "derived key already sealed a file; derive a fresh key");
  sealed_ = true;
}

}  // namespace twofe
