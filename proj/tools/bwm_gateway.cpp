// bwm-gateway: serves a watermarked (or bare) generation API until SIGINT/SIGTERM.

#include "branchwm/error.hpp"
#include "branchwm/gateway.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <iostream>
#include <pthread.h>

int main(int argc, char** argv) {
    CLI::App app{"Watermark gateway"};
    std::string config_path, listen;
    app.add_option("--config", config_path, "key=value config file")->required();
    app.add_option("--listen", listen, "host:port (overrides config)");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    // Block termination signals before any server thread starts so only sigwait sees them.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    bwm::gateway::Deployment d;
    try {
        auto config = bwm::gateway::GatewayConfig::load(config_path);
        if (!listen.empty()) config.listen = listen;
        d = bwm::gateway::deploy(config);
        std::cout << "listening on " << d.handle->url() << " mode=" << bwm::gateway::to_string(config.mode)
                  << std::endl;
    } catch (const std::exception& e) {
        std::cerr << "bwm-gateway: " << e.what() << '\n';
        return 2;
    }

    int sig = 0;
    sigwait(&signals, &sig);
    d.handle->stop();
    if (d.gateway) {
        auto s = d.gateway->stats();
        std::cerr << "requests=" << s.requests << " forensic=" << s.forensic << " replayed=" << s.replayed << '\n';
    }
    return 0;
}
