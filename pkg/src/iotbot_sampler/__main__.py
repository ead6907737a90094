from iotbot_sampler.cli import cli

if __name__ == "__main__":
    cli()
