#pragma once

#include <stdexcept>
#include <string>

namespace qshield {

// Precondition violations are reported with std::invalid_argument or
// std::out_of_range. The types below are domain failures a caller is
// expected to handle (reject an update, abort a channel, ...).

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// AEAD tag did not verify: tampered envelope or wrong key.
class AuthenticationFailure : public Error {
  public:
    AuthenticationFailure() : Error("authentication failure") {}
};

/// Envelope or message bytes do not follow the wire layout.
class MalformedEnvelope : public Error {
  public:
    using Error::Error;
};

/// A one-time signing key was asked to sign a second message.
class KeyReuse : public Error {
  public:
    KeyReuse() : Error("one-time signing key already used") {}
};

class DecapsulationFailure : public Error {
  public:
    using Error::Error;
};

class UnknownScheme : public Error {
  public:
    explicit UnknownScheme(const std::string& name)
        : Error("unknown or unrunnable scheme: " + name) {}
};

/// BB84 session exceeded the allowed error rate.
class QkdAbort : public Error {
  public:
    explicit QkdAbort(double qber)
        : Error("QKD session aborted, QBER " + std::to_string(qber)), qber_(qber) {}
    double qber() const noexcept { return qber_; }

  private:
    double qber_;
};

/// Generic channel-level rejection (digest mismatch, bad signature,
/// failed teleport verification).
class ChannelError : public Error {
  public:
    using Error::Error;
};

} // namespace qshield
