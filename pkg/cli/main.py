from cli.edmdcli import EDMDCommandLine

if __name__ == '__main__':
    EDMDCommandLine().run()
