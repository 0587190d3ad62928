#include <catch2/catch.hpp>

#include <arpa/inet.h>
#include <sys/socket.h>
#include <unistd.h>

#include <thread>

#include "sfamss/transport.hpp"

using namespace sfamss;

namespace {

// raw client socket for hostile byte sequences TcpStream itself refuses to send
int raw_connect(std::uint16_t port) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  REQUIRE(fd >= 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
  REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  return fd;
}

}  // namespace

TEST_CASE("frames round trip over loopback", "[transport]") {
  TcpListener listener = TcpListener::bind_loopback(0);
  REQUIRE(listener.port() != 0);

  Bytes payload{0x53, 0x46, 0x41, 0x4D, 0x01, 0x01, 0, 0, 0, 0, 0, 0, 0, 5};
  std::thread server([&] {
    TcpStream conn = listener.accept();
    Bytes got = conn.recv_frame();
    conn.send_frame(got);  // echo
  });

  TcpStream client = TcpStream::connect("127.0.0.1", listener.port());
  client.send_frame(payload);
  Bytes echoed = client.recv_frame();
  CHECK(echoed == payload);
  server.join();
}

TEST_CASE("oversize frames are refused on the sending side", "[transport]") {
  TcpListener listener = TcpListener::bind_loopback(0);
  TcpStream client = TcpStream::connect("127.0.0.1", listener.port());
  Bytes big(kMaxFrameBytes + 1, 0xAA);
  try {
    client.send_frame(big);
    FAIL("expected FrameTooLarge");
  } catch (const TransportError& e) {
    CHECK(e.kind == TransportError::Kind::FrameTooLarge);
  }
}

TEST_CASE("hostile length prefix triggers FrameTooLarge before buffering", "[transport]") {
  TcpListener listener = TcpListener::bind_loopback(0);

  std::thread hostile_client([&] {
    int fd = raw_connect(listener.port());
    const std::uint8_t prefix[4] = {0x00, 0x20, 0x00, 0x01};  // claims ~2 MiB
    ::send(fd, prefix, sizeof prefix, MSG_NOSIGNAL);
    ::close(fd);
  });

  TcpStream server_side = listener.accept();
  try {
    server_side.recv_frame();
    FAIL("expected FrameTooLarge");
  } catch (const TransportError& e) {
    CHECK(e.kind == TransportError::Kind::FrameTooLarge);
  }
  hostile_client.join();
}

TEST_CASE("peer closing mid-frame is detected", "[transport]") {
  TcpListener listener = TcpListener::bind_loopback(0);

  SECTION("close before any bytes") {
    std::thread server([&] {
      TcpStream conn = listener.accept();
      conn.close();
    });
    TcpStream client = TcpStream::connect("127.0.0.1", listener.port());
    try {
      client.recv_frame();
      FAIL("expected PeerClosed");
    } catch (const TransportError& e) {
      CHECK(e.kind == TransportError::Kind::PeerClosed);
    }
    server.join();
  }

  SECTION("close after a partial frame") {
    std::thread truncating_client([&] {
      int fd = raw_connect(listener.port());
      const std::uint8_t partial[] = {0x00, 0x00, 0x00, 0x0A, 0x01, 0x02};  // claims 10, sends 2
      ::send(fd, partial, sizeof partial, MSG_NOSIGNAL);
      ::close(fd);
    });
    TcpStream server_side = listener.accept();
    try {
      server_side.recv_frame();
      FAIL("expected PeerClosed");
    } catch (const TransportError& e) {
      CHECK(e.kind == TransportError::Kind::PeerClosed);
    }
    truncating_client.join();
  }
}

TEST_CASE("receive timeout fires", "[transport]") {
  TcpListener listener = TcpListener::bind_loopback(0);
  std::thread server([&] {
    TcpStream conn = listener.accept();
    std::this_thread::sleep_for(std::chrono::milliseconds(300));
  });

  TcpStream client = TcpStream::connect("127.0.0.1", listener.port());
  client.set_recv_timeout(50);
  try {
    client.recv_frame();
    FAIL("expected Timeout");
  } catch (const TransportError& e) {
    CHECK(e.kind == TransportError::Kind::Timeout);
  }
  server.join();
}

TEST_CASE("binding a busy port reports PortInUse", "[transport]") {
  TcpListener a = TcpListener::bind_loopback(0);
  try {
    TcpListener b = TcpListener::bind_loopback(a.port());
    FAIL("expected PortInUse");
  } catch (const TransportError& e) {
    CHECK(e.kind == TransportError::Kind::PortInUse);
  }
}

TEST_CASE("connecting to a dead port reports ConnectFailed", "[transport]") {
  std::uint16_t dead_port;
  {
    TcpListener probe = TcpListener::bind_loopback(0);
    dead_port = probe.port();
  }
  try {
    TcpStream::connect("127.0.0.1", dead_port);
    FAIL("expected ConnectFailed");
  } catch (const TransportError& e) {
    CHECK(e.kind == TransportError::Kind::ConnectFailed);
  }
}
